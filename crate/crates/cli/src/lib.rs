//! Batch driver for the logbump experiments: TOML configuration, runs and
//! on-disk artifacts.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

use logbump::Error as CoreError;
use thiserror::Error;

pub use config::{parse_config, Experiment, ExperimentConfig};
pub use run::{run, write_failure, Manifest, RunOptions, Status};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 3 for bad configuration or input, 4 when a solver gave up.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) | Self::Json(_) => 3,
            Self::Core(e) => match e {
                CoreError::Nehari(_)
                | CoreError::LinearSolver { .. }
                | CoreError::Solver(_)
                | CoreError::Precondition(_) => 4,
                _ => 3,
            },
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            4 => "solver",
            _ => "configuration",
        }
    }
}
