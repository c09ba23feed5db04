//! Experiment orchestration behind the `edgebarrier` binary.
//!
//! An experiment is resolved from a flat TOML file overlaid by command-line
//! flags, fanned out over trials on a rayon pool and merged back in trial
//! order, so the files it writes depend only on the config. Every run writes
//! `summary.csv` (or `summary.json`) and `meta.json` into the output
//! directory; some experiments add plot-ready tables next to them.

mod config;
mod edges;
mod run;

use thiserror::Error;

pub use config::{m_from_rho, ConfigLayer, ExperimentConfig, ExperimentKind, OutputFormat};
pub use edges::{
    convergence_table, edge_trials, gram_edges, ConvergenceRow, EdgeResult, EdgeTrial, MeanStd,
};
pub use run::{run_experiment, RunSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] crate::Error),
}

impl HarnessError {
    /// 1 for bad input, 2 for a broken invariant.
    pub fn exit_code(&self) -> i32 {
        use crate::Error as E;
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 1,
            HarnessError::Invariant(_) => 2,
            HarnessError::Core(e) => match e {
                E::InvalidParameter(_)
                | E::Precondition(_)
                | E::EmptyBatch
                | E::DimensionMismatch { .. }
                | E::NotSquare { .. }
                | E::NonFinite { .. }
                | E::NotSymmetric(_) => 1,
                _ => 2,
            },
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
