//! Command-line workflows: configuration, dataset ingestion, model files
//! and the simulate, fit, predict and crossval commands.

mod commands;
mod config;
mod data;
mod output;

use std::path::Path;

use thiserror::Error;

pub use commands::{cmd_crossval, cmd_fit, cmd_predict, cmd_simulate, FittedModel, Transform};
pub use config::{CrossvalSpec, Domain, Family, MeshSpec, ModelSpec, PredictSpec, RunConfig, Scale, SimulateSpec};
pub use data::{load_dataset, LoadedData};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: malformed CSV: {message}")]
    MalformedCsv { path: String, line: u64, message: String },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl AppError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io { path: path.display().to_string(), source }
    }

    /// 1 for numerical failures, 2 for input errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Numerical(_) => 1,
            _ => 2,
        }
    }
}

pub(crate) fn read_text(path: &str) -> Result<String, AppError> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(Path::new(path), e))
}
