use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gig::{gig_sample, GigParams};
use crate::mesh::build_k_alpha;
use crate::model::{prior_mean_v, LatentState, ModelParams, VarianceLaw};
use crate::sparse::SparseSym;
use crate::Scalar;

use super::conditional::{
    conditional_shift, gal_hazard, gig_expectations, v_params_from_residual, ConditionalGaussian, Drivers,
    PrecisionAssembler, INV_V_CAP,
};
use super::stats::SufficientStats;
use super::{InferenceError, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    pub samples: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { samples: 200, burn_in: 100, thinning: 1, seed: 0 }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<(), InferenceError> {
        if self.samples == 0 || self.thinning == 0 {
            return Err(InferenceError::InvalidConfig("samples and thinning must be positive".into()));
        }
        Ok(())
    }
}

/// Receives every kept state together with the Gaussian conditional that
/// produced its `w`.
pub trait StateConsumer<T> {
    fn consume(&mut self, state: &LatentState<T>, cond: &ConditionalGaussian<T>) -> Result<(), InferenceError>;
}

#[derive(Debug, Clone)]
pub struct GibbsOutput<T> {
    /// Statistics of the sampled `(w, V)`.
    pub stats: SufficientStats<T>,
    /// Statistics with `V`, `V⁻¹`, `log V` replaced by their conditional
    /// expectations given `w`.
    pub stats_rb: SufficientStats<T>,
    /// Kept states when retention was requested.
    pub samples: Vec<LatentState<T>>,
    /// Set when the GAL guard capped `E[V⁻¹]`.
    pub hazard: bool,
}

/// Alternates `w | V, y` and `V | w` for fixed parameters.
#[derive(Debug, Clone)]
pub struct GibbsSampler<T> {
    params: ModelParams<T>,
    k: SparseSym<T>,
    asm: PrecisionAssembler<T>,
    cond: ConditionalGaussian<T>,
    drivers: Drivers<T>,
    state: LatentState<T>,
    /// Law of `V` given the current `w`.
    pending: Option<Vec<GigParams<T>>>,
    sweeps: usize,
}

impl<T: Scalar> GibbsSampler<T> {
    /// Starts from `v0`, or from the prior mean of `V`.
    pub fn new(params: &ModelParams<T>, problem: &Problem<T>, v0: Option<Vec<T>>) -> Result<Self, InferenceError> {
        params.validate()?;
        let n = problem.n_nodes();
        let v = match v0 {
            _ if params.noise.is_gaussian() => problem.ops.h.clone(),
            Some(v) => v,
            None => prior_mean_v(&params.noise, &problem.ops.h)?,
        };
        if v.len() != n || v.iter().any(|&x| !(x > T::zero() && x.is_finite())) {
            return Err(InferenceError::InvalidState("V must be positive with one entry per node".into()));
        }
        check_coefficients(params, problem)?;
        let k = build_k_alpha(&problem.ops, params.kappa, params.alpha)?;
        let asm = PrecisionAssembler::new(&k, &problem.a);
        let drivers = Drivers::new(params, problem);
        let (s2, e2) = inverse_scales(params);
        let inv_v: Vec<T> = v.iter().map(|&x| T::one() / x).collect();
        let q = asm.assemble(&inv_v, s2, e2);
        let shift = conditional_shift(params, &k, &drivers, &v);
        let cond = ConditionalGaussian::from_parts(q, shift, None).map_err(|e| failure(0, &v, e))?;
        let state = LatentState { w: cond.mean.clone(), v };
        Ok(Self { params: params.clone(), k, asm, cond, drivers, state, pending: None, sweeps: 0 })
    }

    /// Switches to new parameters keeping the current state and the
    /// symbolic factorization.
    pub fn set_params(&mut self, params: &ModelParams<T>, problem: &Problem<T>) -> Result<(), InferenceError> {
        params.validate()?;
        check_coefficients(params, problem)?;
        if params.alpha != self.params.alpha {
            return Err(InferenceError::InvalidConfig("alpha cannot change between runs".into()));
        }
        self.params = params.clone();
        self.k = build_k_alpha(&problem.ops, params.kappa, params.alpha)?;
        self.asm = PrecisionAssembler::new(&self.k, &problem.a);
        self.drivers = Drivers::new(params, problem);
        if params.noise.is_gaussian() {
            self.state.v = problem.ops.h.clone();
            self.pending = None;
        } else {
            self.pending = Some(self.v_law(problem)?);
        }
        self.refresh()
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn state(&self) -> &LatentState<T> {
        &self.state
    }

    /// The conditional of `w` given the current `V`.
    pub fn conditional(&self) -> &ConditionalGaussian<T> {
        &self.cond
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    fn v_law(&self, problem: &Problem<T>) -> Result<Vec<GigParams<T>>, InferenceError> {
        let kw = self.k.mul_vec(&self.state.w)?;
        let r: Vec<T> = kw.iter().zip(&self.drivers.drift).map(|(&a, &b)| a - b).collect();
        match v_params_from_residual(&self.params, &problem.ops.h, &r, &self.drivers.skew) {
            VarianceLaw::Gig(ps) => Ok(ps),
            VarianceLaw::Fixed(_) => Err(InferenceError::InvalidState("no variance law for a fixed V".into())),
        }
    }

    /// Rebuilds the conditional of `w` for the current `V`.
    fn refresh(&mut self) -> Result<(), InferenceError> {
        let (s2, e2) = inverse_scales(&self.params);
        let inv_v: Vec<T> = self.state.v.iter().map(|&x| T::one() / x).collect();
        self.asm.fill(&mut self.cond.q_hat, &inv_v, s2, e2);
        let sweep = self.sweeps;
        let v = &self.state.v;
        self.cond.factor.refactor(&self.cond.q_hat).map_err(|e| failure(sweep, v, e))?;
        self.cond.shift = conditional_shift(&self.params, &self.k, &self.drivers, &self.state.v);
        self.cond.mean = self.cond.factor.solve(&self.cond.shift)?;
        Ok(())
    }

    /// One sweep: `V | w` (when a law is pending), then `w | V`.
    pub fn sweep<R: Rng + ?Sized>(&mut self, problem: &Problem<T>, rng: &mut R) -> Result<(), InferenceError> {
        if let Some(law) = self.pending.take() {
            for (v, p) in self.state.v.iter_mut().zip(law) {
                *v = gig_sample(p, rng)?.max(T::min_positive_value());
            }
            self.refresh()?;
        }
        self.state.w = self.cond.factor.sample_gaussian(&self.cond.mean, rng)?;
        self.sweeps += 1;
        if !self.params.noise.is_gaussian() {
            self.pending = Some(self.v_law(problem)?);
        }
        Ok(())
    }

    /// `(E[V], E[V⁻¹], E[log V])` given the current `w`.
    fn conditional_moments(&self, cap: Option<T>) -> Result<(Vec<T>, Vec<T>, Vec<T>), InferenceError> {
        match &self.pending {
            None => {
                let v = self.state.v.clone();
                let inv = v.iter().map(|&x| T::one() / x).collect();
                let log = v.iter().map(|&x| x.ln()).collect();
                Ok((v, inv, log))
            }
            Some(law) => {
                let n = law.len();
                let (mut ev, mut einv, mut elog) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
                for &p in law {
                    let (a, b, c) = gig_expectations(p, cap)?;
                    ev.push(a);
                    einv.push(b);
                    elog.push(c);
                }
                Ok((ev, einv, elog))
            }
        }
    }

    /// Runs `burn_in` sweeps and then keeps every `thinning`-th of the next
    /// `samples · thinning` sweeps. With `rb` unset the Rao-Blackwellized
    /// statistics stay empty.
    #[allow(clippy::too_many_arguments)]
    pub fn run<R: Rng + ?Sized>(
        &mut self,
        problem: &Problem<T>,
        samples: usize,
        burn_in: usize,
        thinning: usize,
        rb: bool,
        retain: bool,
        consumers: &mut [&mut dyn StateConsumer<T>],
        rng: &mut R,
    ) -> Result<GibbsOutput<T>, InferenceError> {
        if samples == 0 || thinning == 0 {
            return Err(InferenceError::InvalidConfig("samples and thinning must be positive".into()));
        }
        let hazard = gal_hazard(&self.params, &problem.ops.h);
        let cap = hazard.then(|| T::lit(INV_V_CAP));
        let mut stats = SufficientStats::for_problem(problem);
        let mut stats_rb = SufficientStats::for_problem(problem);
        let mut kept = Vec::new();
        for _ in 0..burn_in {
            self.sweep(problem, rng)?;
        }
        for _ in 0..samples {
            for _ in 0..thinning {
                self.sweep(problem, rng)?;
            }
            let s = &self.state;
            let inv_v: Vec<T> = s.v.iter().map(|&x| T::one() / x).collect();
            let log_v: Vec<T> = s.v.iter().map(|&x| x.ln()).collect();
            stats.accumulate(problem, &s.w, &inv_v, &s.v, &log_v);
            if rb {
                let (ev, einv, elog) = self.conditional_moments(cap)?;
                stats_rb.accumulate(problem, &s.w, &einv, &ev, &elog);
            }
            for c in consumers.iter_mut() {
                c.consume(&self.state, &self.cond)?;
            }
            if retain {
                kept.push(self.state.clone());
            }
        }
        Ok(GibbsOutput { stats, stats_rb, samples: kept, hazard })
    }

    /// The Rao-Blackwellized moments `(E[V], E[V⁻¹], E[log V])` for the
    /// current `w`, as used by the statistics.
    pub fn rb_moments(&self, problem: &Problem<T>) -> Result<(Vec<T>, Vec<T>, Vec<T>), InferenceError> {
        let cap = gal_hazard(&self.params, &problem.ops.h).then(|| T::lit(INV_V_CAP));
        self.conditional_moments(cap)
    }
}

/// A fresh chain from the prior mean of `V`, seeded by `config.seed`.
pub fn gibbs_run<T: Scalar>(
    params: &ModelParams<T>,
    problem: &Problem<T>,
    config: &GibbsConfig,
    retain: bool,
    consumers: &mut [&mut dyn StateConsumer<T>],
) -> Result<GibbsOutput<T>, InferenceError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = GibbsSampler::new(params, problem, None)?;
    sampler.run(problem, config.samples, config.burn_in, config.thinning, true, retain, consumers, &mut rng)
}

fn inverse_scales<T: Scalar>(params: &ModelParams<T>) -> (T, T) {
    let s = params.noise.sigma;
    let e = params.sigma_eps;
    (T::one() / (s * s), T::one() / (e * e))
}

fn check_coefficients<T: Scalar>(params: &ModelParams<T>, problem: &Problem<T>) -> Result<(), InferenceError> {
    let d = &problem.data;
    if d.b.cols() != params.beta.len()
        || d.b_gamma.cols() != params.noise.gamma.len()
        || d.b_mu.cols() != params.noise.mu.len()
    {
        return Err(InferenceError::InvalidState("coefficient lengths differ from covariate columns".into()));
    }
    Ok(())
}

fn failure<T: Scalar>(sweep: usize, v: &[T], e: impl std::fmt::Display) -> InferenceError {
    let lo = v.iter().fold(f64::INFINITY, |m, x| m.min(x.as_f64()));
    let hi = v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(x.as_f64()));
    InferenceError::ChainFailure { sweep, v_min: lo, v_max: hi, message: e.to_string() }
}
