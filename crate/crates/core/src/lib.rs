//! Martingale approximation of partial sums of stationary causal processes,
//! coupling-based dependence measures, and Monte Carlo checks of the
//! resulting moment inequalities and limit theorems.

// `!(x > 0.0)` rejects NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod conditions;
pub mod coupling;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod innovation;
pub mod martingale;
pub mod model;
pub mod sequence;
pub mod series;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
