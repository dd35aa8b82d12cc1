use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, solve_spd};
use crate::mesh::build_k;
use crate::model::{Driver, ModelParams};
use crate::optim::{golden_section_max, safeguarded_newton};
use crate::sparse::{CholFactor, SymbolicCholesky};
use crate::Scalar;

use super::stats::SufficientStats;
use super::{InferenceError, Problem};

/// Floor on the measurement-noise variance.
pub const SIGMA_EPS2_FLOOR: f64 = 1e-12;

/// `β = (BᵀB)⁻¹ b̄_x`, `σ_ε² = (H̄_x − b̄_xᵀβ)/N`.
pub fn mstep_regression<T: Scalar>(stats: &SufficientStats<T>, problem: &Problem<T>) -> Result<(Vec<T>, T), InferenceError> {
    let s = stats.averaged();
    let btb = problem.data.b.gram();
    let beta = solve_spd(&btb, &s.b_x).ok_or(InferenceError::RankDeficientB)?;
    let n = T::from_count(problem.n_obs().max(1));
    let var = ((s.h_x - dot(&s.b_x, &beta)) / n).max(T::lit(SIGMA_EPS2_FLOOR));
    Ok((beta, var.sqrt()))
}

/// Maximizer of the prior term `log π(V | τ)` or `log π(V | ν)`.
pub fn mstep_noise<T: Scalar>(
    stats: &SufficientStats<T>,
    driver: Driver<T>,
    h: &[T],
) -> Result<Driver<T>, InferenceError> {
    let s = stats.averaged();
    match driver {
        Driver::Gaussian => Ok(Driver::Gaussian),
        Driver::Nig { .. } => {
            let root_sum: T = h.iter().map(|&x| x.sqrt()).sum();
            let t = s.sum_h_inv_v;
            let n = T::from_count(h.len());
            if !(t > T::zero()) || !t.is_finite() {
                return Err(InferenceError::InvalidState(format!("h'E[1/V] = {t} is not positive")));
            }
            let nu = (root_sum + (root_sum * root_sum + T::lit(2.0) * n * t).sqrt()) / (T::SQRT_2() * t);
            Ok(Driver::Nig { nu })
        }
        Driver::Gal { tau } => Ok(Driver::Gal { tau: gal_shape(s.sum_h_log_v, tau, h)? }),
    }
}

/// Root of `Σ h log V̄ − Σ h ψ(τh)` by Newton steps on an expanded bracket.
fn gal_shape<T: Scalar>(sum_h_log_v: T, start: T, h: &[T]) -> Result<T, InferenceError> {
    let g = |tau: T| sum_h_log_v - h.iter().map(|&x| x * (tau * x).digamma()).sum::<T>();
    let dg = |tau: T| -h.iter().map(|&x| x * x * crate::trigamma(tau * x)).sum::<T>();
    let two = T::lit(2.0);
    let mut lo = if start > T::zero() && start.is_finite() { start } else { T::one() };
    let mut hi = lo;
    let mut tries = 0;
    while !(g(lo) > T::zero()) {
        lo = lo / two;
        tries += 1;
        if tries > 200 {
            return Err(InferenceError::BracketFailure(format!("derivative stays negative down to tau = {lo:e}")));
        }
    }
    tries = 0;
    while !(g(hi) < T::zero()) {
        hi = hi * two;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(InferenceError::BracketFailure(format!(
                "derivative stays positive up to tau = {hi:e} (sum h log V = {sum_h_log_v:e})"
            )));
        }
    }
    Ok(safeguarded_newton(g, dg, lo, hi, T::lit(1e-11)))
}

/// Search interval for κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum KappaInterval<T> {
    /// `[κ/f, κ f]` around the current value.
    Relative { factor: T },
    Fixed { lo: T, hi: T },
}

impl<T: Scalar> Default for KappaInterval<T> {
    fn default() -> Self {
        KappaInterval::Relative { factor: T::lit(5.0) }
    }
}

impl<T: Scalar> KappaInterval<T> {
    pub fn bounds(&self, kappa: T) -> Result<(T, T), InferenceError> {
        let (lo, hi) = match *self {
            KappaInterval::Relative { factor } => (kappa / factor, kappa * factor),
            KappaInterval::Fixed { lo, hi } => (lo, hi),
        };
        if !(lo > T::zero() && hi > lo && hi.is_finite()) {
            return Err(InferenceError::InvalidConfig(format!("bad kappa interval [{lo}, {hi}]")));
        }
        Ok((lo, hi))
    }
}

/// Profile of the latent term at one κ.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfilePoint<T> {
    pub kappa: T,
    /// `log |K| − (n/2) log(H − bᵀQ_par⁻¹b)`.
    pub loglik: T,
    pub sigma2: T,
    pub mu: Vec<T>,
    pub gamma: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpdeUpdate<T> {
    pub kappa: T,
    pub sigma: T,
    pub gamma: Vec<T>,
    pub mu: Vec<T>,
    pub loglik: T,
    /// True when the best κ lies on the search interval's boundary.
    pub at_edge: bool,
}

/// Evaluates the profiled latent objective at `kappa`. With `gaussian`
/// set, drift and skew are held at zero.
pub fn spde_profile<T: Scalar>(
    stats: &SufficientStats<T>,
    problem: &Problem<T>,
    kappa: T,
    gaussian: bool,
    symbolic: Option<&Arc<SymbolicCholesky>>,
) -> Result<ProfilePoint<T>, InferenceError> {
    let s = stats.averaged();
    let k = build_k(&problem.ops, kappa)?;
    let factor = match symbolic {
        Some(sym) => CholFactor::with_symbolic(Arc::clone(sym), &k)?,
        None => CholFactor::new(&k)?,
    };
    let n_mu = s.s6.len();
    let n_gamma = s.s4.len();
    let h = s.quad_kw(kappa);
    let (mu, gamma, resid) = if gaussian {
        (vec![T::zero(); n_mu], vec![T::zero(); n_gamma], h)
    } else {
        let k2 = kappa * kappa;
        let mut b: Vec<T> = s.s6.iter().zip(&s.s7).map(|(&a, &c)| k2 * a + c).collect();
        b.extend(s.s4.iter().zip(&s.s5).map(|(&a, &c)| k2 * a + c));
        let q = q_par(&s, problem);
        let theta = solve_spd(&q, &b).ok_or(InferenceError::SingularQpar)?;
        let resid = h - dot(&b, &theta);
        (theta[..n_mu].to_vec(), theta[n_mu..].to_vec(), resid)
    };
    let n = T::from_count(problem.n_nodes());
    if !(resid > T::zero()) {
        return Err(InferenceError::InvalidState(format!("non-positive residual quadratic form {resid:e} at kappa {kappa}")));
    }
    let loglik = factor.log_det() - n * T::lit(0.5) * resid.ln();
    Ok(ProfilePoint { kappa, loglik, sigma2: resid / n, mu, gamma })
}

/// `[[S9, B_μᵀB_γ], [B_γᵀB_μ, S8]]` from averaged statistics.
fn q_par<T: Scalar>(s: &SufficientStats<T>, problem: &Problem<T>) -> Vec<Vec<T>> {
    let d = &problem.data;
    let cross = d.b_mu.weighted_cross(None, &d.b_gamma);
    let (nm, ng) = (s.s9.len(), s.s8.len());
    let mut q = vec![vec![T::zero(); nm + ng]; nm + ng];
    for i in 0..nm {
        for j in 0..nm {
            q[i][j] = s.s9[i][j];
        }
        for j in 0..ng {
            q[i][nm + j] = cross[i][j];
            q[nm + j][i] = cross[i][j];
        }
    }
    for i in 0..ng {
        for j in 0..ng {
            q[nm + i][nm + j] = s.s8[i][j];
        }
    }
    q
}

/// Maximizes the κ profile by golden section over `log κ` and returns the
/// closed-form companions at the maximizer.
pub fn mstep_spde<T: Scalar>(
    stats: &SufficientStats<T>,
    problem: &Problem<T>,
    params: &ModelParams<T>,
    interval: KappaInterval<T>,
) -> Result<SpdeUpdate<T>, InferenceError> {
    if params.alpha != 2 {
        return Err(InferenceError::UnsupportedAlpha);
    }
    let gaussian = params.noise.is_gaussian();
    let (lo, hi) = interval.bounds(params.kappa)?;
    let sym = Arc::new(SymbolicCholesky::analyse(&build_k(&problem.ops, params.kappa)?));
    let best = golden_section_max(
        |lk: T| spde_profile(stats, problem, lk.exp(), gaussian, Some(&sym)).map(|p| p.loglik),
        lo.ln(),
        hi.ln(),
        T::lit(1e-7),
    )?;
    let p = spde_profile(stats, problem, best.x.exp(), gaussian, Some(&sym))?;
    Ok(SpdeUpdate {
        kappa: p.kappa,
        sigma: p.sigma2.sqrt(),
        gamma: p.gamma,
        mu: p.mu,
        loglik: p.loglik,
        at_edge: best.at_edge,
    })
}
