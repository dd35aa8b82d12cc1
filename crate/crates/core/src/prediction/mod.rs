//! Kriging from Gibbs chains, scoring rules and cross-validation.

mod crossval;
mod krige;
mod score;

use thiserror::Error;

use crate::inference::InferenceError;
use crate::mesh::MeshError;
use crate::model::ModelError;

pub use crossval::{crossval, fold_partition, CrossValConfig, CrossValResult, RefitPolicy, ResidualRow};
pub use krige::{krige, Kriger, PredictMode, PredictionResult};
pub use score::{crps_mc, energy_score_mc, residual_summaries, ResidualSummary, Scores};

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("at least two samples per location are needed, got {0}")]
    TooFewSamples(usize),
    #[error("predictive variance at index {index} is not positive")]
    NonPositiveVariance { index: usize },
    #[error("row {row} needs an inverse entry outside the selected pattern")]
    PatternNotCovered { row: usize },
    #[error("{folds} folds need at least {folds} observations, got {n}")]
    FoldTooSmall { folds: usize, n: usize },
    #[error("length mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<PredictionError> for InferenceError {
    fn from(e: PredictionError) -> Self {
        match e {
            PredictionError::Inference(inner) => inner,
            other => InferenceError::InvalidState(other.to_string()),
        }
    }
}
