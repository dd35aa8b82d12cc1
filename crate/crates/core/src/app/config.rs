use serde::{Deserialize, Serialize};

use crate::inference::{GibbsConfig, McemConfig};
use crate::mesh::{build_mesh_1d, build_mesh_2d, Mesh, Rect};
use crate::model::{Driver, ModelParams, NoiseSpec};
use crate::prediction::RefitPolicy;

use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rect { .. } => 2,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            Domain::Interval { a, b } => p[0] >= a && p[0] <= b,
            Domain::Rect { x0, x1, y0, y1 } => Rect::new(x0, x1, y0, y1).contains(p, 0.0),
        }
    }

    /// Uniform point in the domain (second coordinate zero in 1D).
    pub fn uniform<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        match *self {
            Domain::Interval { a, b } => [a + (b - a) * rng.random::<f64>(), 0.0],
            Domain::Rect { x0, x1, y0, y1 } => {
                let x = x0 + (x1 - x0) * rng.random::<f64>();
                [x, y0 + (y1 - y0) * rng.random::<f64>()]
            }
        }
    }

    /// `m` points per axis spanning the domain.
    pub fn lattice(&self, m: usize) -> Vec<[f64; 2]> {
        let tick = |lo: f64, hi: f64, i: usize| if m == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 };
        match *self {
            Domain::Interval { a, b } => (0..m).map(|i| [tick(a, b, i), 0.0]).collect(),
            Domain::Rect { x0, x1, y0, y1 } => {
                (0..m).flat_map(|j| (0..m).map(move |i| [tick(x0, x1, i), tick(y0, y1, j)])).collect()
            }
        }
    }
}

/// Mesh description. A missing extension is resolved to two correlation
/// ranges of the configured κ, meshed four times coarser than `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub domain: Domain,
    pub edge: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_edge: Option<f64>,
}

impl MeshSpec {
    pub fn resolved(&self, kappa: f64, alpha: u32) -> MeshSpec {
        let nu = alpha as f64 - 0.5 * self.domain.dim() as f64;
        let width = self.extension.unwrap_or(2.0 * (8.0 * nu).sqrt() / kappa);
        MeshSpec { extension: Some(width), extension_edge: Some(self.extension_edge.unwrap_or(4.0 * self.edge)), ..*self }
    }

    pub fn build(&self) -> Result<Mesh<f64>, AppError> {
        let width = self.extension.unwrap_or(0.0);
        let mesh = match self.domain {
            Domain::Interval { a, b } => {
                if !(self.edge > 0.0) {
                    return Err(AppError::Config("mesh edge must be positive".into()));
                }
                let cells = ((b - a + 2.0 * width) / self.edge).ceil().max(1.0) as usize;
                build_mesh_1d(a - width, b + width, cells + 1)
            }
            Domain::Rect { x0, x1, y0, y1 } => {
                build_mesh_2d(Rect::new(x0, x1, y0, y1), self.edge, width, self.extension_edge.unwrap_or(4.0 * self.edge))
            }
        };
        mesh.map_err(|e| AppError::Config(format!("mesh: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Gal,
    Nig,
}

/// True parameters for simulation or initial values for fitting. `beta`
/// lists the intercept first, then one coefficient per covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default = "default_alpha")]
    pub alpha: u32,
    pub kappa: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "one")]
    pub nu: f64,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Start non-Gaussian fits from a Gaussian fit of the same data.
    #[serde(default = "yes")]
    pub gaussian_start: bool,
}

fn default_alpha() -> u32 {
    2
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl ModelSpec {
    pub fn driver(&self) -> Driver<f64> {
        match self.family {
            Family::Gaussian => Driver::Gaussian,
            Family::Gal => Driver::Gal { tau: self.tau },
            Family::Nig => Driver::Nig { nu: self.nu },
        }
    }

    /// Parameters with missing values filled from `sigma_eps` and `beta`
    /// fallbacks.
    pub fn params(&self, sigma_eps: f64, beta: Vec<f64>) -> Result<ModelParams<f64>, AppError> {
        let beta = self.beta.clone().unwrap_or(beta);
        if beta.len() != self.covariates.len() + 1 {
            return Err(AppError::Config(format!(
                "beta needs {} entries (intercept plus covariates), got {}",
                self.covariates.len() + 1,
                beta.len()
            )));
        }
        let noise = match self.family {
            Family::Gaussian => NoiseSpec::gaussian(self.sigma),
            _ => NoiseSpec { driver: self.driver(), gamma: vec![self.gamma], mu: vec![self.mu], sigma: self.sigma },
        };
        let p = ModelParams { kappa: self.kappa, alpha: self.alpha, beta, sigma_eps: self.sigma_eps.unwrap_or(sigma_eps), noise };
        p.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSpec {
    pub n_obs: usize,
    /// Independent field draws written to the field file; observations use
    /// the first.
    pub replicates: usize,
    /// Optional CSV of observation locations (columns `x[,y]`) used instead
    /// of uniform random locations.
    pub locations: Option<String>,
    /// Sets σ_ε to this multiple of the sample sd of the field at the
    /// observation locations.
    pub relative_noise: Option<f64>,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self { n_obs: 0, replicates: 1, locations: None, relative_noise: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Latent,
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictSpec {
    /// Lattice points per axis in the plot-data file.
    pub lattice: usize,
    pub scale: Scale,
}

impl Default for PredictSpec {
    fn default() -> Self {
        Self { lattice: 50, scale: Scale::Latent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossvalSpec {
    pub folds: usize,
    pub policy: RefitPolicy,
    /// Fitted model whose parameters replace the model spec values.
    pub model: Option<String>,
}

impl Default for CrossvalSpec {
    fn default() -> Self {
        Self { folds: 10, policy: RefitPolicy::Reuse, model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mesh: MeshSpec,
    pub model: ModelSpec,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    #[serde(default)]
    pub mcem: McemConfig,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub predict: PredictSpec,
    #[serde(default)]
    pub crossval: CrossvalSpec,
    #[serde(default = "default_output")]
    pub output: String,
}

fn default_output() -> String {
    ".".into()
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let mut c: RunConfig = serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
        c.set_seed(c.seed);
        if c.model.alpha != 2 && c.model.alpha != 4 {
            return Err(AppError::Config("alpha must be 2 or 4".into()));
        }
        if !(c.model.kappa > 0.0) {
            return Err(AppError::Config("kappa must be positive".into()));
        }
        c.gibbs.validate().map_err(|e| AppError::Config(e.to_string()))?;
        c.mcem.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(c)
    }

    pub fn load(path: &str) -> Result<Self, AppError> {
        Self::from_json(&super::read_text(path)?)
    }

    /// One seed drives every random stream of a run.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.gibbs.seed = seed;
        self.mcem.seed = seed;
    }

    pub fn mesh_spec(&self) -> MeshSpec {
        self.mesh.resolved(self.model.kappa, self.model.alpha)
    }
}
