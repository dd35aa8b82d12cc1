use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mesh::build_k;
use crate::model::{Driver, LatentState, ModelParams, NoiseSpec};
use crate::sparse::CholFactor;
use crate::Scalar;

use super::gibbs::GibbsSampler;
use super::mstep::{mstep_noise, mstep_regression, mstep_spde, KappaInterval};
use super::stats::{complete_loglik, SufficientStats};
use super::{InferenceError, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McemConfig {
    pub max_iter: usize,
    /// Samples in the first iteration.
    pub k0: usize,
    pub k_max: usize,
    pub growth: f64,
    /// Burn-in of the first chain.
    pub burn_in: usize,
    /// Burn-in of each warm-started chain after the first.
    pub warm_burn_in: usize,
    pub thinning: usize,
    /// Relative parameter change counted as converged.
    pub tol: f64,
    /// Consecutive converged iterations needed to stop.
    pub patience: usize,
    pub kappa_interval: KappaInterval<f64>,
    pub seed: u64,
}

impl Default for McemConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            k0: 50,
            k_max: 2000,
            growth: 1.2,
            burn_in: 100,
            warm_burn_in: 10,
            thinning: 1,
            tol: 1e-3,
            patience: 5,
            kappa_interval: KappaInterval::default(),
            seed: 0,
        }
    }
}

impl McemConfig {
    /// `min(k_max, ⌈k0 · growth^p⌉)`.
    pub fn samples_at(&self, p: usize) -> usize {
        let k = (self.k0 as f64 * self.growth.powi(p as i32)).ceil();
        if k >= self.k_max as f64 {
            self.k_max
        } else {
            (k as usize).max(1)
        }
    }

    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.k0 == 0 || self.k_max == 0 || self.thinning == 0 || self.patience == 0 {
            return Err(InferenceError::InvalidConfig("sample counts, thinning and patience must be positive".into()));
        }
        if !(self.growth >= 1.0 && self.tol >= 0.0) {
            return Err(InferenceError::InvalidConfig("growth must be at least 1 and tol non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroIterations,
    Converged,
    MaxIterations,
}

/// One EM iteration: the parameters it produced and the objective values
/// at those parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub samples: usize,
    pub params: ModelParams<T>,
    pub q_rb: T,
    pub q_mc: T,
    pub rel_change: T,
    pub kappa_at_edge: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub params: ModelParams<T>,
    pub trace: Vec<TraceRow<T>>,
    pub iterations: usize,
    pub termination: Termination,
    pub warnings: Vec<String>,
    /// Final state of the chain (`None` after zero iterations).
    pub state: Option<LatentState<T>>,
}

fn flatten<T: Scalar>(p: &ModelParams<T>) -> Vec<T> {
    let noise = match p.noise.driver {
        Driver::Gaussian => T::zero(),
        Driver::Gal { tau } => tau,
        Driver::Nig { nu } => nu,
    };
    let mut out = vec![p.kappa, p.noise.sigma, p.sigma_eps, noise];
    out.extend(&p.beta);
    out.extend(&p.noise.gamma);
    out.extend(&p.noise.mu);
    out
}

/// `‖θ_new − θ_old‖ / ‖θ_old‖` over all scalar parameters.
pub fn relative_change<T: Scalar>(old: &ModelParams<T>, new: &ModelParams<T>) -> T {
    let (a, b) = (flatten(old), flatten(new));
    let num: T = a.iter().zip(&b).map(|(&x, &y)| (y - x) * (y - x)).sum();
    let den: T = a.iter().map(|&x| x * x).sum();
    (num / den.max(T::min_positive_value())).sqrt()
}

/// The three M-step blocks applied to one set of statistics.
pub fn mstep<T: Scalar>(
    stats: &SufficientStats<T>,
    problem: &Problem<T>,
    params: &ModelParams<T>,
    interval: KappaInterval<T>,
) -> Result<(ModelParams<T>, bool), InferenceError> {
    let (beta, sigma_eps) = mstep_regression(stats, problem)?;
    let driver = mstep_noise(stats, params.noise.driver, &problem.ops.h)?;
    let spde = mstep_spde(stats, problem, params, interval)?;
    let mut next = params.clone();
    next.beta = beta;
    next.sigma_eps = sigma_eps;
    next.kappa = spde.kappa;
    next.noise.driver = driver;
    next.noise.sigma = spde.sigma;
    if !params.noise.is_gaussian() {
        next.noise.gamma = spde.gamma;
        next.noise.mu = spde.mu;
    }
    Ok((next, spde.at_edge))
}

/// Monte Carlo EM from `init` (α = 2 only).
pub fn mcem_fit<T: Scalar>(
    problem: &Problem<T>,
    init: &ModelParams<T>,
    config: &McemConfig,
) -> Result<FitResult<T>, InferenceError> {
    config.validate()?;
    init.validate()?;
    if init.alpha != 2 {
        return Err(InferenceError::UnsupportedAlpha);
    }
    if config.max_iter == 0 {
        return Ok(FitResult {
            params: init.clone(),
            trace: Vec::new(),
            iterations: 0,
            termination: Termination::ZeroIterations,
            warnings: Vec::new(),
            state: None,
        });
    }
    let interval = match config.kappa_interval {
        KappaInterval::Relative { factor } => KappaInterval::Relative { factor: T::lit(factor) },
        KappaInterval::Fixed { lo, hi } => KappaInterval::Fixed { lo: T::lit(lo), hi: T::lit(hi) },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = GibbsSampler::new(init, problem, None)?;
    let mut params = init.clone();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut hazard_noted = false;
    let mut streak = 0;
    let mut termination = Termination::MaxIterations;
    for it in 0..config.max_iter {
        let ctx = |e: InferenceError| InferenceError::Iteration { iteration: it, source: Box::new(e) };
        let k = config.samples_at(it);
        let burn = if it == 0 { config.burn_in } else { config.warm_burn_in };
        let out = sampler.run(problem, k, burn, config.thinning, true, false, &mut [], &mut rng).map_err(ctx)?;
        if out.hazard && !hazard_noted {
            hazard_noted = true;
            warnings.push(format!(
                "iteration {it}: tau*h is within 0.05 of 1/2 at some node; E[1/V] capped at {:e}",
                super::INV_V_CAP
            ));
        }
        let (next, at_edge) = mstep(&out.stats_rb, problem, &params, interval).map_err(ctx)?;
        if at_edge {
            warnings.push(format!("iteration {it}: kappa maximum on the search interval edge ({})", next.kappa));
        }
        let log_det = CholFactor::new(&build_k(&problem.ops, next.kappa)?)?.log_det();
        let q_rb = complete_loglik(&out.stats_rb, &next, problem, log_det);
        let q_mc = complete_loglik(&out.stats, &next, problem, log_det);
        let change = relative_change(&params, &next);
        trace.push(TraceRow {
            iteration: it,
            samples: k,
            params: next.clone(),
            q_rb,
            q_mc,
            rel_change: change,
            kappa_at_edge: at_edge,
        });
        params = next;
        sampler.set_params(&params, problem).map_err(ctx)?;
        if change < T::lit(config.tol) {
            streak += 1;
            if streak >= config.patience {
                termination = Termination::Converged;
                break;
            }
        } else {
            streak = 0;
        }
    }
    Ok(FitResult {
        params,
        iterations: trace.len(),
        trace,
        termination,
        warnings,
        state: Some(sampler.state().clone()),
    })
}

/// Fits the Gaussian-driven model from `init` and maps the result to a
/// starting point for `init`'s family: κ, β and σ_ε are copied and σ is
/// rescaled so that `E[V]` matches the Gaussian `V = h`.
pub fn gaussian_start<T: Scalar>(
    problem: &Problem<T>,
    init: &ModelParams<T>,
    config: &McemConfig,
) -> Result<(ModelParams<T>, FitResult<T>), InferenceError> {
    let scale = match init.noise.driver {
        Driver::Gaussian => T::one(),
        Driver::Gal { tau } => tau,
        Driver::Nig { .. } => T::one(),
    };
    let mut gauss = init.clone();
    gauss.noise = NoiseSpec::gaussian(init.noise.sigma * scale.sqrt());
    let fit = mcem_fit(problem, &gauss, config)?;
    let mut start = init.clone();
    start.kappa = fit.params.kappa;
    start.beta = fit.params.beta.clone();
    start.sigma_eps = fit.params.sigma_eps;
    start.noise.sigma = fit.params.noise.sigma / scale.sqrt();
    Ok((start, fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_schedule() {
        let c = McemConfig::default();
        assert_eq!(c.samples_at(0), 50);
        assert_eq!(c.samples_at(1), 60);
        assert_eq!(c.samples_at(2), 72);
        assert_eq!(c.samples_at(100), 2000);
    }
}
