use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::inference::{ConditionalGaussian, GibbsConfig, GibbsSampler, InferenceError, Problem, StateConsumer};
use crate::mesh::ObservationMatrix;
use crate::model::{LatentState, ModelParams};
use crate::sparse::SparseSym;
use crate::Scalar;

use super::PredictionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    Mc,
    Rb,
    #[default]
    Both,
}

impl PredictMode {
    fn mc(self) -> bool {
        matches!(self, PredictMode::Mc | PredictMode::Both)
    }

    fn rb(self) -> bool {
        matches!(self, PredictMode::Rb | PredictMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult<T> {
    pub locations: Vec<[T; 2]>,
    pub mean_mc: Vec<T>,
    pub mean_rb: Vec<T>,
    pub var_mc: Vec<T>,
    /// Mean conditional variance plus the spread of the conditional means.
    pub var_rb: Vec<T>,
    /// Mean conditional variance alone.
    pub var_rb_conditional: Vec<T>,
    pub k: usize,
}

/// Per-coordinate running mean and sum of squared deviations.
#[derive(Debug, Clone)]
struct Moments<T> {
    n: usize,
    mean: Vec<T>,
    m2: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    fn new(len: usize) -> Self {
        Self { n: 0, mean: vec![T::zero(); len], m2: vec![T::zero(); len] }
    }

    fn push(&mut self, x: &[T]) {
        self.n += 1;
        let nf = T::from_count(self.n);
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / nf;
            *s += d * (v - *m);
        }
    }

    /// Unbiased variance; zero with fewer than two values.
    fn variance(&self) -> Vec<T> {
        if self.n < 2 {
            return vec![T::zero(); self.m2.len()];
        }
        let d = T::from_count(self.n - 1);
        self.m2.iter().map(|&s| (s / d).max(T::zero())).collect()
    }
}

/// Chain consumer accumulating kriging moments at the rows of `A_p`,
/// optionally keeping one predictive draw per state and location.
#[derive(Debug, Clone)]
pub struct Kriger<T> {
    ap: ObservationMatrix<T>,
    offset: Vec<T>,
    mode: PredictMode,
    mc: Moments<T>,
    rb: Moments<T>,
    quad_sum: Vec<T>,
    cached: Option<(Vec<T>, Vec<T>)>,
    draws: Option<(T, ChaCha8Rng)>,
    kept: Vec<Vec<T>>,
}

impl<T: Scalar> Kriger<T> {
    /// `offset` is added to every prediction (typically `B_p β`).
    pub fn new(ap: ObservationMatrix<T>, offset: Vec<T>, mode: PredictMode) -> Result<Self, PredictionError> {
        let m = ap.n_rows();
        if offset.len() != m {
            return Err(PredictionError::DimensionMismatch(format!("{} offsets for {m} rows", offset.len())));
        }
        Ok(Self {
            ap,
            offset,
            mode,
            mc: Moments::new(m),
            rb: Moments::new(m),
            quad_sum: vec![T::zero(); m],
            cached: None,
            draws: None,
            kept: vec![Vec::new(); m],
        })
    }

    /// Also keeps predictive draws `offset + A_p w + ε`, `ε ~ N(0, noise_sd²)`
    /// (`noise_sd = 0` for latent-scale draws).
    pub fn with_draws(mut self, noise_sd: T, seed: u64) -> Self {
        self.draws = Some((noise_sd, ChaCha8Rng::seed_from_u64(seed)));
        self
    }

    /// Predictive draws per location, in chain order.
    pub fn draws(&self) -> &[Vec<T>] {
        &self.kept
    }

    pub fn samples(&self) -> usize {
        self.mc.n.max(self.rb.n)
    }

    /// `diag(A_p Q̂⁻¹ A_pᵀ)`, from the selected inverse where possible and
    /// by one solve per uncovered row otherwise.
    fn quadratic_terms(&self, cond: &ConditionalGaussian<T>) -> Result<Vec<T>, InferenceError> {
        let sel = cond.factor.selected_inverse();
        let mut out = Vec::with_capacity(self.ap.n_rows());
        for r in 0..self.ap.n_rows() {
            let q = match row_quadratic(&sel, self.ap.row(r), r) {
                Ok(q) => q,
                Err(PredictionError::PatternNotCovered { .. }) => {
                    let mut e = vec![T::zero(); cond.factor.order()];
                    for &(j, a) in self.ap.row(r) {
                        e[j] = a;
                    }
                    let x = cond.factor.solve(&e)?;
                    self.ap.row(r).iter().map(|&(j, a)| a * x[j]).sum()
                }
                Err(e) => return Err(e.into()),
            };
            out.push(q.max(T::zero()));
        }
        Ok(out)
    }

    pub fn result(&self, locations: Vec<[T; 2]>) -> PredictionResult<T> {
        let m = self.ap.n_rows();
        let k = self.samples();
        let add = |v: &[T]| v.iter().zip(&self.offset).map(|(&a, &b)| a + b).collect::<Vec<_>>();
        let (mean_mc, var_mc) = if self.mode.mc() {
            (add(&self.mc.mean), self.mc.variance())
        } else {
            (vec![T::nan(); m], vec![T::nan(); m])
        };
        let (mean_rb, var_rb, var_rb_conditional) = if self.mode.rb() {
            let n = T::from_count(self.rb.n.max(1));
            let cond: Vec<T> = self.quad_sum.iter().map(|&q| q / n).collect();
            let total = cond.iter().zip(self.rb.variance()).map(|(&a, b)| a + b).collect();
            (add(&self.rb.mean), total, cond)
        } else {
            (vec![T::nan(); m], vec![T::nan(); m], vec![T::nan(); m])
        };
        PredictionResult { locations, mean_mc, mean_rb, var_mc, var_rb, var_rb_conditional, k }
    }
}

/// `a Σ aᵀ` for one sparse row using entries of the selected inverse.
fn row_quadratic<T: Scalar>(sel: &SparseSym<T>, row: &[(usize, T)], r: usize) -> Result<T, PredictionError> {
    let vals = sel.values();
    let mut s = T::zero();
    for &(i, a) in row {
        for &(j, b) in row {
            let p = sel.position(i, j).ok_or(PredictionError::PatternNotCovered { row: r })?;
            s += a * b * vals[p];
        }
    }
    Ok(s)
}

impl<T: Scalar> StateConsumer<T> for Kriger<T> {
    fn consume(&mut self, state: &LatentState<T>, cond: &ConditionalGaussian<T>) -> Result<(), InferenceError> {
        let apw = self.ap.mul_vec(&state.w);
        if self.mode.mc() {
            self.mc.push(&apw);
        }
        if self.mode.rb() {
            self.rb.push(&self.ap.mul_vec(&cond.mean));
            let reuse = matches!(&self.cached, Some((q, _)) if q.as_slice() == cond.q_hat.values());
            if !reuse {
                let quad = self.quadratic_terms(cond)?;
                self.cached = Some((cond.q_hat.values().to_vec(), quad));
            }
            let quad = &self.cached.as_ref().expect("filled above").1;
            for (s, &q) in self.quad_sum.iter_mut().zip(quad) {
                *s += q;
            }
        }
        if let Some((sd, rng)) = &mut self.draws {
            for (i, &x) in apw.iter().enumerate() {
                let eps = if *sd > T::zero() { *sd * T::standard_normal(rng) } else { T::zero() };
                self.kept[i].push(self.offset[i] + x + eps);
            }
        }
        Ok(())
    }
}

/// Runs a fresh chain under `params` and kriges at `locations`. Locations
/// outside the mesh are an error here; see `ObservationMatrix::build_partial`.
pub fn krige<T: Scalar>(
    params: &ModelParams<T>,
    problem: &Problem<T>,
    locations: &[[T; 2]],
    offset: Vec<T>,
    config: &GibbsConfig,
    mode: PredictMode,
) -> Result<PredictionResult<T>, PredictionError> {
    config.validate()?;
    let ap = ObservationMatrix::build(&problem.mesh, locations)?;
    let mut kr = Kriger::new(ap, offset, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = GibbsSampler::new(params, problem, None)?;
    sampler.run(problem, config.samples, config.burn_in, config.thinning, false, false, &mut [&mut kr], &mut rng)?;
    Ok(kr.result(locations.to_vec()))
}
