use crate::dense::dot;
use crate::model::{Driver, ModelParams};
use crate::gig::log_bessel_k;
use crate::Scalar;

use super::Problem;

/// Running sums from which every M-step quantity (α = 2) is rebuilt.
///
/// With `c = C w`, `g = G w`, `D = diag(V)`:
/// `s1 = Σ cᵀD⁻¹c`, `s2 = Σ cᵀD⁻¹g`, `s3 = Σ gᵀD⁻¹g`, `s4 = Σ B_γᵀD⁻¹c`,
/// `s5 = Σ B_γᵀD⁻¹g`, `s6 = Σ B_μᵀc`, `s7 = Σ B_μᵀg`, `s8 = Σ B_γᵀD⁻¹B_γ`,
/// `s9 = Σ B_μᵀD B_μ`, `b_x = Σ Bᵀ(y − Aw)`, `h_x = Σ ‖y − Aw‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats<T> {
    pub k: usize,
    pub s1: T,
    pub s2: T,
    pub s3: T,
    pub s4: Vec<T>,
    pub s5: Vec<T>,
    pub s6: Vec<T>,
    pub s7: Vec<T>,
    pub s8: Vec<Vec<T>>,
    pub s9: Vec<Vec<T>>,
    pub b_x: Vec<T>,
    pub h_x: T,
    pub sum_log_v: T,
    pub sum_h_log_v: T,
    pub sum_v: T,
    pub sum_h_inv_v: T,
}

impl<T: Scalar> SufficientStats<T> {
    pub fn new(n_gamma: usize, n_mu: usize, n_beta: usize) -> Self {
        let z = T::zero();
        Self {
            k: 0,
            s1: z,
            s2: z,
            s3: z,
            s4: vec![z; n_gamma],
            s5: vec![z; n_gamma],
            s6: vec![z; n_mu],
            s7: vec![z; n_mu],
            s8: vec![vec![z; n_gamma]; n_gamma],
            s9: vec![vec![z; n_mu]; n_mu],
            b_x: vec![z; n_beta],
            h_x: z,
            sum_log_v: z,
            sum_h_log_v: z,
            sum_v: z,
            sum_h_inv_v: z,
        }
    }

    pub fn for_problem(problem: &Problem<T>) -> Self {
        let d = &problem.data;
        Self::new(d.b_gamma.cols(), d.b_mu.cols(), d.b.cols())
    }

    /// Adds one state. `inv_v`, `v` and `log_v` are either the sampled
    /// values or their conditional expectations. The state is summed on its
    /// own before joining the totals.
    pub fn accumulate(&mut self, problem: &Problem<T>, w: &[T], inv_v: &[T], v: &[T], log_v: &[T]) {
        let h = &problem.ops.h;
        let d = &problem.data;
        let mut st = Self::for_problem(problem);
        let c: Vec<T> = h.iter().zip(w).map(|(&a, &b)| a * b).collect();
        let g = problem.ops.g.mul_vec(w).expect("state length matches mesh");
        for i in 0..w.len() {
            let iv = inv_v[i];
            let (ci, gi) = (c[i], g[i]);
            st.s1 += ci * ci * iv;
            st.s2 += ci * gi * iv;
            st.s3 += gi * gi * iv;
            let bg = d.b_gamma.row(i);
            for (a, &ba) in bg.iter().enumerate() {
                st.s4[a] += ba * iv * ci;
                st.s5[a] += ba * iv * gi;
                for (b, &bb) in bg.iter().enumerate() {
                    st.s8[a][b] += ba * iv * bb;
                }
            }
            let bm = d.b_mu.row(i);
            for (a, &ba) in bm.iter().enumerate() {
                st.s6[a] += ba * ci;
                st.s7[a] += ba * gi;
                for (b, &bb) in bm.iter().enumerate() {
                    st.s9[a][b] += ba * v[i] * bb;
                }
            }
            st.sum_log_v += log_v[i];
            st.sum_h_log_v += h[i] * log_v[i];
            st.sum_v += v[i];
            st.sum_h_inv_v += h[i] * iv;
        }
        let aw = problem.a.mul_vec(w);
        let resid: Vec<T> = d.y.iter().zip(&aw).map(|(&y, &x)| y - x).collect();
        for (acc, x) in st.b_x.iter_mut().zip(d.b.transpose_mul(&resid)) {
            *acc += x;
        }
        st.h_x += dot(&resid, &resid);
        st.k = 1;
        self.merge(&st);
    }

    /// Adds another accumulator built on the same problem.
    pub fn merge(&mut self, other: &Self) {
        fn add<T: Scalar>(a: &mut [T], b: &[T]) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.k += other.k;
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.s3 += other.s3;
        add(&mut self.s4, &other.s4);
        add(&mut self.s5, &other.s5);
        add(&mut self.s6, &other.s6);
        add(&mut self.s7, &other.s7);
        for (a, b) in self.s8.iter_mut().zip(&other.s8) {
            add(a, b);
        }
        for (a, b) in self.s9.iter_mut().zip(&other.s9) {
            add(a, b);
        }
        add(&mut self.b_x, &other.b_x);
        self.h_x += other.h_x;
        self.sum_log_v += other.sum_log_v;
        self.sum_h_log_v += other.sum_h_log_v;
        self.sum_v += other.sum_v;
        self.sum_h_inv_v += other.sum_h_inv_v;
    }

    /// Every accumulator divided by the sample count.
    pub fn averaged(&self) -> Self {
        let s = T::one() / T::from_count(self.k.max(1));
        let sc = |v: &[T]| v.iter().map(|&x| x * s).collect::<Vec<_>>();
        Self {
            k: 1,
            s1: self.s1 * s,
            s2: self.s2 * s,
            s3: self.s3 * s,
            s4: sc(&self.s4),
            s5: sc(&self.s5),
            s6: sc(&self.s6),
            s7: sc(&self.s7),
            s8: self.s8.iter().map(|r| sc(r)).collect(),
            s9: self.s9.iter().map(|r| sc(r)).collect(),
            b_x: sc(&self.b_x),
            h_x: self.h_x * s,
            sum_log_v: self.sum_log_v * s,
            sum_h_log_v: self.sum_h_log_v * s,
            sum_v: self.sum_v * s,
            sum_h_inv_v: self.sum_h_inv_v * s,
        }
    }

    /// `κ⁴ s1 + 2κ² s2 + s3`, the averaged `(Kw)ᵀD⁻¹(Kw)`.
    pub fn quad_kw(&self, kappa: T) -> T {
        let k2 = kappa * kappa;
        (k2 * k2 * self.s1 + T::lit(2.0) * k2 * self.s2 + self.s3) / T::from_count(self.k.max(1))
    }
}

/// Average complete-data log-likelihood `log π(y, w, V | Θ)` over the
/// accumulated states (α = 2), given `log |K(κ)|`.
pub fn complete_loglik<T: Scalar>(stats: &SufficientStats<T>, params: &ModelParams<T>, problem: &Problem<T>, log_det_k: T) -> T {
    let s = stats.averaged();
    let d = &problem.data;
    let n = T::from_count(problem.n_nodes());
    let n_obs = T::from_count(d.y.len());
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let ln_2pi = (two * T::PI()).ln();

    let btb = d.b.gram();
    let beta = &params.beta;
    let btb_beta: Vec<T> = btb.iter().map(|r| dot(r, beta)).collect();
    let se2 = params.sigma_eps * params.sigma_eps;
    let resid2 = s.h_x - two * dot(beta, &s.b_x) + dot(beta, &btb_beta);
    let obs = -half * n_obs * (ln_2pi + se2.ln()) - resid2 / (two * se2);

    let (kappa, g, m) = (params.kappa, &params.noise.gamma, &params.noise.mu);
    let k2 = kappa * kappa;
    let lin_g: Vec<T> = s.s4.iter().zip(&s.s5).map(|(&a, &b)| k2 * a + b).collect();
    let lin_m: Vec<T> = s.s6.iter().zip(&s.s7).map(|(&a, &b)| k2 * a + b).collect();
    let s8g: Vec<T> = s.s8.iter().map(|r| dot(r, g)).collect();
    let s9m: Vec<T> = s.s9.iter().map(|r| dot(r, m)).collect();
    let cross = d.b_mu.weighted_cross(None, &d.b_gamma);
    let cross_g: Vec<T> = cross.iter().map(|r| dot(r, g)).collect();
    let quad = s.quad_kw(kappa) - two * dot(g, &lin_g) - two * dot(m, &lin_m) + dot(g, &s8g) + two * dot(m, &cross_g) + dot(m, &s9m);
    let sigma2 = params.noise.sigma * params.noise.sigma;
    let latent = log_det_k - half * n * (ln_2pi + sigma2.ln()) - half * s.sum_log_v - quad / (two * sigma2);

    let h = &problem.ops.h;
    let prior = match params.noise.driver {
        Driver::Gaussian => T::zero(),
        Driver::Gal { tau } => {
            let lg: T = h.iter().map(|&hi| (tau * hi).log_gamma()).sum();
            tau * s.sum_h_log_v - s.sum_log_v - s.sum_v - lg
        }
        Driver::Nig { nu } => {
            let p = T::lit(-0.5);
            let nu2 = nu * nu;
            let consts: T = h
                .iter()
                .map(|&hi| {
                    let b = nu2 * hi;
                    p * half * (two / b).ln() - T::LN_2() - log_bessel_k(p, (two * b).sqrt())
                })
                .sum();
            consts + (p - T::one()) * s.sum_log_v - s.sum_v - half * nu2 * s.sum_h_inv_v
        }
    };
    obs + latent + prior
}
