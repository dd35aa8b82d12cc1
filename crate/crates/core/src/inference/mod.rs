//! Gibbs sampling of `(w, V)` given the data and Monte Carlo EM estimation.

mod conditional;
mod gibbs;
mod mcem;
mod mstep;
mod stats;

use thiserror::Error;

use crate::gig::GigError;
use crate::mesh::{FemOperators, Mesh, MeshError, ObservationMatrix};
use crate::model::{Dataset, ModelError};
use crate::sparse::SparseError;
use crate::Scalar;

pub use conditional::{
    conditional_shift, conditional_v_params, conditional_w, gal_hazard, gig_expectations, v_params_from_residual,
    ConditionalGaussian, Drivers, PrecisionAssembler, B_FLOOR, INV_V_CAP,
};
pub use gibbs::{gibbs_run, GibbsConfig, GibbsOutput, GibbsSampler, StateConsumer};
pub use mcem::{gaussian_start, mcem_fit, mstep, relative_change, FitResult, McemConfig, Termination, TraceRow};
pub use mstep::{
    mstep_noise, mstep_regression, mstep_spde, spde_profile, KappaInterval, ProfilePoint, SpdeUpdate, SIGMA_EPS2_FLOOR,
};
pub use stats::{complete_loglik, SufficientStats};

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Gig(#[from] GigError),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("Gibbs chain failed at sweep {sweep} (V range [{v_min:e}, {v_max:e}]): {message}")]
    ChainFailure { sweep: usize, v_min: f64, v_max: f64, message: String },
    #[error("mean design B is rank deficient")]
    RankDeficientB,
    #[error("drift and skew covariates are collinear")]
    SingularQpar,
    #[error("could not bracket the GAL shape update: {0}")]
    BracketFailure(String),
    #[error("estimation supports alpha = 2 only")]
    UnsupportedAlpha,
    #[error("EM iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<InferenceError>,
    },
}

/// Mesh, operators, observation matrix and data of one estimation problem.
#[derive(Debug, Clone)]
pub struct Problem<T> {
    pub mesh: Mesh<T>,
    pub ops: FemOperators<T>,
    pub a: ObservationMatrix<T>,
    pub data: Dataset<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(mesh: Mesh<T>, data: Dataset<T>) -> Result<Self, InferenceError> {
        let ops = FemOperators::assemble(&mesh)?;
        let a = ObservationMatrix::build(&mesh, &data.locations)?;
        data.check(mesh.n_nodes())?;
        Ok(Self { mesh, ops, a, data })
    }

    pub fn n_nodes(&self) -> usize {
        self.ops.n()
    }

    pub fn n_obs(&self) -> usize {
        self.data.y.len()
    }
}
