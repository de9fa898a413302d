//! Monte-Carlo harness for EDA-PNC: sum-rate curves, rate regions, the
//! asymptotic-gap experiment, CSV output and the `edapnc` command line.

pub mod cli;
pub mod output;
pub mod runner;
pub mod scenario;

use std::path::PathBuf;

pub use runner::{
    evaluate_schemes, gap_for_realization, run_asymptotic_gap, run_rate_region, run_sum_rate_curve,
    CurvePoint, CurveRun, EvalOptions, GapRow, GapRun, RegionRun, RunSummary,
};
pub use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] edapnc::Error),

    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{0} solver warning(s) with --strict")]
    Strict(usize),
}

impl HarnessError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Strict(_) => 3,
            _ => 1,
        }
    }
}
