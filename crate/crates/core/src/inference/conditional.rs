use std::sync::Arc;

use crate::gig::{gig_first_moments, gig_moment, GigParams};
use crate::mesh::build_k_alpha;
use crate::model::{Driver, ModelParams, VarianceLaw};
use crate::sparse::{CholFactor, SparseSym, SymbolicCholesky};
use crate::Scalar;

use super::{InferenceError, Problem};

/// Floor applied to the `b` parameter of the conditional GIG law.
pub const B_FLOOR: f64 = 1e-12;

/// Cap on conditional `E[V⁻¹]` while the GAL hazard guard is active.
pub const INV_V_CAP: f64 = 1e6;

/// Fills `Q̂ = σ⁻² K D⁻¹ K + σ_ε⁻² AᵀA` on a fixed pattern.
///
/// For every node `l` the products `K_il K_lj` (i ≤ j) and their positions
/// in the pattern are stored once, so a refill only rescales them by
/// `1/V_l`.
#[derive(Debug, Clone)]
pub struct PrecisionAssembler<T> {
    pattern: SparseSym<T>,
    ata: Vec<T>,
    node_ptr: Vec<usize>,
    pos: Vec<usize>,
    coef: Vec<T>,
}

impl<T: Scalar> PrecisionAssembler<T> {
    pub fn new(k: &SparseSym<T>, a: &crate::mesh::ObservationMatrix<T>) -> Self {
        let n = k.order();
        let cols = k.full_columns();
        let mut trip = Vec::new();
        for col in &cols {
            for &(i, _) in col {
                for &(j, _) in col {
                    if i <= j {
                        trip.push((i, j, T::one()));
                    }
                }
            }
        }
        trip.extend(a.gram_triplets(T::one()).into_iter().map(|(i, j, _)| (i, j, T::one())));
        let pattern = SparseSym::from_triplets(n, trip).expect("indices come from valid matrices");
        let mut ata = vec![T::zero(); pattern.nnz()];
        for (i, j, v) in a.gram_triplets(T::one()) {
            ata[pattern.position(i, j).expect("in pattern")] += v;
        }
        let mut node_ptr = Vec::with_capacity(n + 1);
        node_ptr.push(0);
        let mut pos = Vec::new();
        let mut coef = Vec::new();
        for col in &cols {
            for &(i, ki) in col {
                for &(j, kj) in col {
                    if i <= j {
                        pos.push(pattern.position(i, j).expect("in pattern"));
                        coef.push(ki * kj);
                    }
                }
            }
            node_ptr.push(pos.len());
        }
        Self { pattern, ata, node_ptr, pos, coef }
    }

    /// The zero-valued pattern of `Q̂`.
    pub fn pattern(&self) -> &SparseSym<T> {
        &self.pattern
    }

    /// Writes `Q̂` for the given `1/V` into `q`, which must carry the pattern.
    pub fn fill(&self, q: &mut SparseSym<T>, inv_v: &[T], inv_sigma2: T, inv_eps2: T) {
        let vals = q.values_mut();
        for (v, &a) in vals.iter_mut().zip(&self.ata) {
            *v = inv_eps2 * a;
        }
        for (l, &iv) in inv_v.iter().enumerate() {
            let s = inv_sigma2 * iv;
            for p in self.node_ptr[l]..self.node_ptr[l + 1] {
                vals[self.pos[p]] += s * self.coef[p];
            }
        }
    }

    pub fn assemble(&self, inv_v: &[T], inv_sigma2: T, inv_eps2: T) -> SparseSym<T> {
        let mut q = self.pattern.clone();
        self.fill(&mut q, inv_v, inv_sigma2, inv_eps2);
        q
    }
}

/// `N(m̂, Q̂⁻¹)`, the law of `w` given `V` and `y`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian<T> {
    pub q_hat: SparseSym<T>,
    pub shift: Vec<T>,
    pub factor: CholFactor<T>,
    pub mean: Vec<T>,
}

impl<T: Scalar> ConditionalGaussian<T> {
    /// Builds from an assembled precision, reusing `symbolic` when given.
    pub fn from_parts(
        q_hat: SparseSym<T>,
        shift: Vec<T>,
        symbolic: Option<&Arc<SymbolicCholesky>>,
    ) -> Result<Self, InferenceError> {
        let factor = match symbolic {
            Some(s) => CholFactor::with_symbolic(Arc::clone(s), &q_hat)?,
            None => CholFactor::new(&q_hat)?,
        };
        let mean = factor.solve(&shift)?;
        Ok(Self { q_hat, shift, factor, mean })
    }
}

/// Per-node vectors reused by every conditional: `B_γγ̃`, `B_μμ` and
/// `Aᵀ(y − Bβ)`.
#[derive(Debug, Clone)]
pub struct Drivers<T> {
    pub drift: Vec<T>,
    pub skew: Vec<T>,
    pub at_resid: Vec<T>,
}

impl<T: Scalar> Drivers<T> {
    pub fn new(params: &ModelParams<T>, problem: &Problem<T>) -> Self {
        let d = &problem.data;
        let drift = d.b_gamma.mul_vec(&params.noise.gamma);
        let skew = d.b_mu.mul_vec(&params.noise.mu);
        let mean = d.b.mul_vec(&params.beta);
        let resid: Vec<T> = d.y.iter().zip(&mean).map(|(&y, &m)| y - m).collect();
        let at_resid = problem.a.transpose_mul(&resid);
        Self { drift, skew, at_resid }
    }
}

/// `σ⁻² K (D⁻¹ B_γγ̃ + B_μμ) + σ_ε⁻² Aᵀ(y − Bβ)`.
pub fn conditional_shift<T: Scalar>(params: &ModelParams<T>, k: &SparseSym<T>, drivers: &Drivers<T>, v: &[T]) -> Vec<T> {
    let inv_s2 = T::one() / (params.noise.sigma * params.noise.sigma);
    let inv_e2 = T::one() / (params.sigma_eps * params.sigma_eps);
    let inner: Vec<T> = (0..v.len()).map(|i| drivers.drift[i] / v[i] + drivers.skew[i]).collect();
    let kin = k.mul_vec(&inner).expect("dimensions agree");
    kin.iter()
        .zip(&drivers.at_resid)
        .map(|(&a, &b)| inv_s2 * a + inv_e2 * b)
        .collect()
}

/// The Gaussian conditional of `w` given `V` and the data.
pub fn conditional_w<T: Scalar>(
    params: &ModelParams<T>,
    problem: &Problem<T>,
    v: &[T],
) -> Result<ConditionalGaussian<T>, InferenceError> {
    params.validate()?;
    let n = problem.n_nodes();
    if v.len() != n || v.iter().any(|&x| !(x > T::zero())) {
        return Err(InferenceError::InvalidState("V must be positive with one entry per node".into()));
    }
    let k = build_k_alpha(&problem.ops, params.kappa, params.alpha)?;
    let asm = PrecisionAssembler::new(&k, &problem.a);
    let inv_v: Vec<T> = v.iter().map(|&x| T::one() / x).collect();
    let inv_s2 = T::one() / (params.noise.sigma * params.noise.sigma);
    let inv_e2 = T::one() / (params.sigma_eps * params.sigma_eps);
    let q = asm.assemble(&inv_v, inv_s2, inv_e2);
    let drivers = Drivers::new(params, problem);
    let shift = conditional_shift(params, &k, &drivers, v);
    ConditionalGaussian::from_parts(q, shift, None)
}

/// Table 1 parameters from the residual `r = K_α w − B_γγ̃` and skew
/// `s = B_μμ`. Never reads the observations.
pub fn v_params_from_residual<T: Scalar>(params: &ModelParams<T>, h: &[T], r: &[T], s: &[T]) -> VarianceLaw<T> {
    let sigma2 = params.noise.sigma * params.noise.sigma;
    let two = T::lit(2.0);
    let floor = T::lit(B_FLOOR);
    let make = |p: T, i: usize, extra: T| GigParams {
        p,
        a: s[i] * s[i] / sigma2 + two,
        b: (r[i] * r[i] / sigma2 + extra).max(floor),
    };
    match params.noise.driver {
        Driver::Gaussian => VarianceLaw::Fixed(h.to_vec()),
        Driver::Gal { tau } => {
            VarianceLaw::Gig((0..h.len()).map(|i| make(h[i] * tau - T::lit(0.5), i, T::zero())).collect())
        }
        Driver::Nig { nu } => VarianceLaw::Gig((0..h.len()).map(|i| make(-T::one(), i, h[i] * nu * nu)).collect()),
    }
}

/// Law of `V` given `w` (independent of `y`).
pub fn conditional_v_params<T: Scalar>(
    params: &ModelParams<T>,
    problem: &Problem<T>,
    w: &[T],
) -> Result<VarianceLaw<T>, InferenceError> {
    let k = build_k_alpha(&problem.ops, params.kappa, params.alpha)?;
    let kw = k.mul_vec(w)?;
    let drift = problem.data.b_gamma.mul_vec(&params.noise.gamma);
    let skew = problem.data.b_mu.mul_vec(&params.noise.mu);
    let r: Vec<T> = kw.iter().zip(&drift).map(|(&a, &b)| a - b).collect();
    Ok(v_params_from_residual(params, &problem.ops.h, &r, &skew))
}

/// `(E[V], E[V⁻¹], E[log V])` under a GIG law; `cap` bounds `E[V⁻¹]`.
pub fn gig_expectations<T: Scalar>(p: GigParams<T>, cap: Option<T>) -> Result<(T, T, T), InferenceError> {
    let (e_v, e_inv, e_log) = gig_first_moments(p, true)?;
    let e_inv = match (e_inv, cap) {
        (Some(m), Some(c)) => m.min(c),
        (Some(m), None) => m,
        (None, Some(c)) => c,
        (None, None) => gig_moment(p, -T::one())?,
    };
    Ok((e_v, e_inv, e_log.expect("log moment requested")))
}

/// True when the GAL conditional order `τh − 1/2` comes close to zero,
/// where `E[V⁻¹]` blows up as `b → 0`.
pub fn gal_hazard<T: Scalar>(params: &ModelParams<T>, h: &[T]) -> bool {
    match params.noise.driver {
        Driver::Gal { tau } => h.iter().any(|&hi| (tau * hi - T::lit(0.5)).abs() < T::lit(0.05)),
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NoiseSpec;

    fn gal(tau: f64) -> ModelParams<f64> {
        ModelParams {
            kappa: 1.0,
            alpha: 2,
            beta: vec![0.0],
            sigma_eps: 1.0,
            noise: NoiseSpec { driver: Driver::Gal { tau }, gamma: vec![0.0], mu: vec![0.0], sigma: 1.0 },
        }
    }

    #[test]
    fn table_one_rows() {
        match v_params_from_residual(&gal(2.0), &[1.0], &[3.0], &[0.0]) {
            VarianceLaw::Gig(p) => assert_eq!(p[0], GigParams { p: 1.5, a: 2.0, b: 9.0 }),
            _ => panic!(),
        }
        let mut nig = gal(1.0);
        nig.noise.driver = Driver::Nig { nu: 1.0 };
        match v_params_from_residual(&nig, &[1.0], &[0.0], &[0.0]) {
            VarianceLaw::Gig(p) => assert_eq!(p[0], GigParams { p: -1.0, a: 2.0, b: 1.0 }),
            _ => panic!(),
        }
        match v_params_from_residual(&gal(2.0), &[1.0], &[0.0], &[0.0]) {
            VarianceLaw::Gig(p) => assert_eq!(p[0].b, B_FLOOR),
            _ => panic!(),
        }
    }

    #[test]
    fn hazard_detection() {
        assert!(gal_hazard(&gal(1.0), &[0.52]));
        assert!(!gal_hazard(&gal(1.0), &[0.6]));
    }
}
