//! The hierarchical SPDE model: parameters, prior variance laws, simulation
//! and the reference Matérn covariance.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::Matrix;
use crate::gig::{gig_moment, gig_sample, log_bessel_k, GigError, GigParams};
use crate::mesh::{build_k_alpha, FemOperators, MeshError, ObservationMatrix};
use crate::sparse::{CholFactor, SparseError};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("Matérn smoothness must be positive and dimension 1 or 2")]
    InvalidShape,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Gig(#[from] GigError),
}

/// Driving noise family with its family-specific parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Driver<T> {
    /// Gaussian white noise; `V_i ≡ h_i` and the noise scale φ is `sigma`.
    Gaussian,
    /// Generalized asymmetric Laplace, `V_i ~ Γ(τ h_i, 1)`.
    Gal { tau: T },
    /// Normal inverse Gaussian, `V_i ~ IG` with parameter ν.
    Nig { nu: T },
}

impl<T> Driver<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Driver::Gaussian => "gaussian",
            Driver::Gal { .. } => "gal",
            Driver::Nig { .. } => "nig",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    pub driver: Driver<T>,
    /// Drift coefficients on `B_γ` (τ already absorbed for GAL).
    pub gamma: Vec<T>,
    /// Skewness coefficients on `B_μ`.
    pub mu: Vec<T>,
    pub sigma: T,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn gaussian(phi: T) -> Self {
        Self { driver: Driver::Gaussian, gamma: vec![T::zero()], mu: vec![T::zero()], sigma: phi }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.driver, Driver::Gaussian)
    }

    /// Drift in the per-unit-shape GAL parametrization (`γ̃ / τ`); other families
    /// return `γ̃` unchanged.
    pub fn display_gamma(&self) -> Vec<T> {
        match self.driver {
            Driver::Gal { tau } => self.gamma.iter().map(|&g| g / tau).collect(),
            _ => self.gamma.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub kappa: T,
    pub alpha: u32,
    pub beta: Vec<T>,
    pub sigma_eps: T,
    pub noise: NoiseSpec<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Matérn smoothness `α − d/2`.
    pub fn nu_shape(&self, dim: usize) -> T {
        T::from_count(self.alpha as usize) - T::from_count(dim) * T::lit(0.5)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if !(self.kappa > T::zero()) {
            return bad("kappa must be positive");
        }
        if self.alpha != 2 && self.alpha != 4 {
            return bad("alpha must be 2 or 4");
        }
        if !(self.sigma_eps > T::zero()) {
            return bad("sigma_eps must be positive");
        }
        if !(self.noise.sigma >= T::zero()) {
            return bad("sigma must be nonnegative");
        }
        match self.noise.driver {
            Driver::Gal { tau } if !(tau > T::zero()) => bad("tau must be positive"),
            Driver::Nig { nu } if !(nu > T::zero()) => bad("nu must be positive"),
            _ => Ok(()),
        }
    }
}

/// One state of the latent variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState<T> {
    pub w: Vec<T>,
    pub v: Vec<T>,
}

/// Observations and covariates. `b` has one row per observation, `b_gamma`
/// and `b_mu` one row per mesh node.
#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub locations: Vec<[T; 2]>,
    pub y: Vec<T>,
    pub b: Matrix<T>,
    pub b_gamma: Matrix<T>,
    pub b_mu: Matrix<T>,
}

impl<T: Scalar> Dataset<T> {
    /// Intercept-only mean design and all-ones node covariates.
    pub fn with_default_covariates(locations: Vec<[T; 2]>, y: Vec<T>, n_nodes: usize) -> Self {
        let n_obs = y.len();
        Self { locations, y, b: Matrix::ones(n_obs), b_gamma: Matrix::ones(n_nodes), b_mu: Matrix::ones(n_nodes) }
    }

    pub fn check(&self, n_nodes: usize) -> Result<(), ModelError> {
        let mismatch = |m: String| Err(ModelError::DimensionMismatch(m));
        if self.locations.len() != self.y.len() || self.b.rows() != self.y.len() {
            return mismatch(format!(
                "{} locations, {} observations, {} design rows",
                self.locations.len(),
                self.y.len(),
                self.b.rows()
            ));
        }
        if self.b_gamma.rows() != n_nodes || self.b_mu.rows() != n_nodes {
            return mismatch(format!("node covariates need {n_nodes} rows"));
        }
        Ok(())
    }
}

/// Matérn covariance at distance `dist` with range parameter κ, smoothness
/// ν, noise scale φ in dimension `d`.
pub fn matern_cov<T: Scalar>(dist: T, kappa: T, nu: T, phi: T, d: usize) -> Result<T, ModelError> {
    if !(nu > T::zero()) || !(d == 1 || d == 2) || !(kappa > T::zero()) || !(dist >= T::zero()) {
        return Err(ModelError::InvalidShape);
    }
    let half_d = T::from_count(d) * T::lit(0.5);
    let ln2 = T::LN_2();
    let log_const = (T::one() - nu) * ln2 + T::lit(2.0) * phi.ln()
        - half_d * (T::lit(4.0) * T::PI()).ln()
        - (nu + half_d).log_gamma()
        - T::lit(2.0) * nu * kappa.ln();
    let x = kappa * dist;
    let log_shape = if x > T::zero() {
        nu * x.ln() + log_bessel_k(nu, x)
    } else {
        (nu - T::one()) * ln2 + nu.log_gamma()
    };
    Ok((log_const + log_shape).exp())
}

/// Prior law of the variance components.
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceLaw<T> {
    /// `V = h` exactly.
    Fixed(Vec<T>),
    Gig(Vec<GigParams<T>>),
}

pub fn prior_variance_params<T: Scalar>(noise: &NoiseSpec<T>, h: &[T]) -> Result<VarianceLaw<T>, ModelError> {
    if h.iter().any(|&v| !(v > T::zero())) {
        return Err(ModelError::InvalidParams("cell sizes must be positive".into()));
    }
    let two = T::lit(2.0);
    Ok(match noise.driver {
        Driver::Gaussian => VarianceLaw::Fixed(h.to_vec()),
        Driver::Gal { tau } => VarianceLaw::Gig(
            h.iter().map(|&hi| GigParams::new(hi * tau, two, T::zero())).collect::<Result<_, _>>()?,
        ),
        Driver::Nig { nu } => VarianceLaw::Gig(
            h.iter()
                .map(|&hi| GigParams::new(T::lit(-0.5), two, nu * nu * hi))
                .collect::<Result<_, _>>()?,
        ),
    })
}

/// Prior mean of each `V_i`.
pub fn prior_mean_v<T: Scalar>(noise: &NoiseSpec<T>, h: &[T]) -> Result<Vec<T>, ModelError> {
    match prior_variance_params(noise, h)? {
        VarianceLaw::Fixed(v) => Ok(v),
        VarianceLaw::Gig(ps) => ps.into_iter().map(|p| gig_moment(p, T::one()).map_err(Into::into)).collect(),
    }
}

/// Draws `V` from its prior.
pub fn sample_prior_v<T: Scalar, R: Rng + ?Sized>(noise: &NoiseSpec<T>, h: &[T], rng: &mut R) -> Result<Vec<T>, ModelError> {
    match prior_variance_params(noise, h)? {
        VarianceLaw::Fixed(v) => Ok(v),
        VarianceLaw::Gig(ps) => ps.into_iter().map(|p| gig_sample(p, rng).map_err(Into::into)).collect(),
    }
}

/// Right-hand side `B_γγ̃ + V∘(B_μμ) + σ√V∘z`.
pub fn forcing<T: Scalar>(noise: &NoiseSpec<T>, b_gamma: &Matrix<T>, b_mu: &Matrix<T>, v: &[T], z: &[T]) -> Vec<T> {
    let drift = b_gamma.mul_vec(&noise.gamma);
    let skew = b_mu.mul_vec(&noise.mu);
    (0..v.len())
        .map(|i| drift[i] + v[i] * skew[i] + noise.sigma * v[i].sqrt() * z[i])
        .collect()
}

fn check_covariates<T: Scalar>(params: &ModelParams<T>, n: usize, b_gamma: &Matrix<T>, b_mu: &Matrix<T>) -> Result<(), ModelError> {
    if b_gamma.rows() != n || b_mu.rows() != n {
        return Err(ModelError::DimensionMismatch(format!("node covariates need {n} rows")));
    }
    if b_gamma.cols() != params.noise.gamma.len() || b_mu.cols() != params.noise.mu.len() {
        return Err(ModelError::DimensionMismatch("coefficient lengths differ from covariate columns".into()));
    }
    Ok(())
}

/// Draws `(w, V)` from the model: `V` from its prior, then
/// `w = K_α⁻¹(B_γγ̃ + V∘(B_μμ) + σ√V∘Z)`.
pub fn simulate_latent<T: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    ops: &FemOperators<T>,
    b_gamma: &Matrix<T>,
    b_mu: &Matrix<T>,
    rng: &mut R,
) -> Result<LatentState<T>, ModelError> {
    params.validate()?;
    let n = ops.n();
    check_covariates(params, n, b_gamma, b_mu)?;
    let k = build_k_alpha(ops, params.kappa, params.alpha)?;
    let factor = CholFactor::new(&k)?;
    let v = sample_prior_v(&params.noise, &ops.h, rng)?;
    let z: Vec<T> = (0..n).map(|_| T::standard_normal(rng)).collect();
    let rhs = forcing(&params.noise, b_gamma, b_mu, &v, &z);
    let w = factor.solve(&rhs)?;
    Ok(LatentState { w, v })
}

/// `y = Bβ + A w + ε` with `ε ~ N(0, σ_ε²)`.
pub fn simulate_observations<T: Scalar, R: Rng + ?Sized>(
    params: &ModelParams<T>,
    a: &ObservationMatrix<T>,
    b: &Matrix<T>,
    w: &[T],
    rng: &mut R,
) -> Result<Vec<T>, ModelError> {
    if b.rows() != a.n_rows() || b.cols() != params.beta.len() || w.len() != a.n_nodes() {
        return Err(ModelError::DimensionMismatch("observation design".into()));
    }
    let mean = b.mul_vec(&params.beta);
    let aw = a.mul_vec(w);
    Ok(mean
        .iter()
        .zip(&aw)
        .map(|(&m, &x)| m + x + params.sigma_eps * T::standard_normal(rng))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh_1d;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matern_values() {
        let c0 = matern_cov(0.0f64, 1.0, 1.0, 1.0, 2).unwrap();
        assert!((c0 - 1.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        // C(2/κ)/C(0) = 2 K_1(2)
        let c2 = matern_cov(2.0f64, 1.0, 1.0, 1.0, 2).unwrap();
        assert!((c2 / c0 - 0.279_731_763_633_044_85).abs() < 1e-12);
        for nu in [0.5f64, 1.0, 2.0] {
            let mut prev = f64::INFINITY;
            for i in 0..100 {
                let c = matern_cov(i as f64 * 0.05, 1.3, nu, 1.0, 2).unwrap();
                assert!(c <= prev);
                prev = c;
            }
        }
        assert!(matern_cov(1.0f64, 1.0, 0.0, 1.0, 2).is_err());
    }

    #[test]
    fn prior_laws() {
        let gal = NoiseSpec { driver: Driver::Gal { tau: 3.0f64 }, gamma: vec![0.0], mu: vec![0.0], sigma: 1.0 };
        match prior_variance_params(&gal, &[0.5]).unwrap() {
            VarianceLaw::Gig(p) => assert_eq!(p[0], GigParams { p: 1.5, a: 2.0, b: 0.0 }),
            _ => panic!(),
        }
        let nig = NoiseSpec { driver: Driver::Nig { nu: 2.0f64 }, ..gal.clone() };
        match prior_variance_params(&nig, &[0.25]).unwrap() {
            VarianceLaw::Gig(p) => assert_eq!(p[0], GigParams { p: -0.5, a: 2.0, b: 1.0 }),
            _ => panic!(),
        }
        assert_eq!(prior_variance_params(&NoiseSpec::gaussian(1.0f64), &[0.3]).unwrap(), VarianceLaw::Fixed(vec![0.3]));
        assert!((prior_mean_v(&gal, &[0.5]).unwrap()[0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn noise_free_latent_is_deterministic_drift() {
        let mesh = build_mesh_1d(0.0f64, 4.0, 9).unwrap();
        let ops = FemOperators::assemble(&mesh).unwrap();
        let params = ModelParams {
            kappa: 1.0,
            alpha: 2,
            beta: vec![0.0],
            sigma_eps: 0.1,
            noise: NoiseSpec { driver: Driver::Gal { tau: 2.0 }, gamma: vec![0.7], mu: vec![0.0], sigma: 0.0 },
        };
        let ones = Matrix::ones(9);
        let st = simulate_latent(&params, &ops, &ones, &ones, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let k = build_k_alpha(&ops, 1.0, 2).unwrap();
        let kw = k.mul_vec(&st.w).unwrap();
        for v in kw {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn observations_add_mean_and_noise() {
        let mesh = build_mesh_1d(0.0f64, 1.0, 3).unwrap();
        let a = ObservationMatrix::build(&mesh, &[[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let params = ModelParams { kappa: 1.0, alpha: 2, beta: vec![5.0], sigma_eps: 1e-300, noise: NoiseSpec::gaussian(1.0) };
        let y = simulate_observations(&params, &a, &Matrix::ones(2), &[0.0; 3], &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(y, vec![5.0, 5.0]);
    }
}
