//! Config-driven experiments and their CSV reports.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{Check, ExperimentConfig, ModelConfig};
pub use report::{report_summary, Row, RowVerdict, Summary};
pub use runner::{run, run_check, RunOutput};
