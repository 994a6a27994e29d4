use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sipcheck::experiment::{report_summary, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "sipcheck", version, about = "Run and summarize dependence and invariance-principle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks of an experiment config and write CSV reports.
    Run {
        config: PathBuf,
        /// Overrides the root seed of the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (does not change the reports).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Summarize the reports in a directory; exits 1 if any row failed.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Run { config, seed, jobs } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(j) = jobs {
                pool = pool.num_threads(j.max(1));
            }
            let out = pool.build()?.install(|| run(&cfg))?;
            for p in &out.reports {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dir } => {
            let summary = report_summary(&dir)?;
            print!("{}", summary.text);
            Ok(ExitCode::from(summary.exit_code() as u8))
        }
    }
}
