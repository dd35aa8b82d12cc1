//! Non-Gaussian Matérn random fields through the SPDE approach: sparse
//! precision algebra, finite element meshes, GIG variance mixtures,
//! Monte Carlo EM estimation and kriging.

pub mod app;
pub mod dense;
pub mod gig;
pub mod inference;
pub mod mesh;
pub mod model;
pub mod optim;
pub mod prediction;
mod scalar;
pub mod sparse;

pub use scalar::{trigamma, Scalar};

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type Params64 = model::ModelParams<f64>;
pub type Params32 = model::ModelParams<f32>;
pub type Dataset64 = model::Dataset<f64>;
pub type Dataset32 = model::Dataset<f32>;
pub type Problem64 = inference::Problem<f64>;
pub type Problem32 = inference::Problem<f32>;
pub type SparseSym64 = sparse::SparseSym<f64>;
pub type SparseSym32 = sparse::SparseSym<f32>;
pub type CholFactor64 = sparse::CholFactor<f64>;
pub type CholFactor32 = sparse::CholFactor<f32>;
pub type GigParams64 = gig::GigParams<f64>;
pub type GigParams32 = gig::GigParams<f32>;
