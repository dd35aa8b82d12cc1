use rand::Rng;

use super::{GigError, GigParams, Kind};
use crate::Scalar;

/// Exact GIG variate.
///
/// Gamma, inverse Gamma and inverse Gaussian cases use direct samplers.
/// Otherwise `V = √(b/a) X` with `X ~ GIG(λ, ω, ω)`, `ω = √(ab)`, drawn by
/// ratio-of-uniforms (with or without mode shift) or, for small `ω` and
/// `λ < 1`, rejection from a three-piece hat.
pub fn gig_sample<T: Scalar, R: Rng + ?Sized>(params: GigParams<T>, rng: &mut R) -> Result<T, GigError> {
    params.validate()?;
    let GigParams { p, a, b } = params;
    let half = T::lit(0.5);
    Ok(match params.kind() {
        Kind::Gamma => T::gamma_variate(p, rng) / (a * half),
        Kind::InvGamma => b * half / T::gamma_variate(-p, rng),
        Kind::General if p == T::lit(-0.5) => inverse_gaussian((b / a).sqrt(), b, rng),
        Kind::General => {
            let omega = params.omega();
            let lam = p.abs();
            let x = standard_gig(lam, omega, rng);
            let x = if p < T::zero() { T::one() / x } else { x };
            (b / a).sqrt() * x
        }
    })
}

/// Inverse Gaussian with mean `m` and shape `s` (transformation with
/// multiple roots).
fn inverse_gaussian<T: Scalar, R: Rng + ?Sized>(m: T, s: T, rng: &mut R) -> T {
    let n = T::standard_normal(rng);
    let y = n * n;
    let z = m * y / (s + s);
    let x1 = m / (T::one() + z + (z * (z + T::lit(2.0))).sqrt());
    let u = T::open01(rng);
    if u <= m / (m + x1) {
        x1
    } else {
        m * m / x1
    }
}

/// Mode of `x^{λ−1} exp(−ω(x + 1/x)/2)`.
fn mode<T: Scalar>(lam: T, omega: T) -> T {
    let lm1 = lam - T::one();
    if lam >= T::one() {
        ((lm1 * lm1 + omega * omega).sqrt() + lm1) / omega
    } else {
        omega / ((lm1 * lm1 + omega * omega).sqrt() - lm1)
    }
}

/// `X ~ GIG(λ, ω, ω)` for λ ≥ 0, ω > 0.
fn standard_gig<T: Scalar, R: Rng + ?Sized>(lam: T, omega: T, rng: &mut R) -> T {
    let one = T::one();
    if lam > one || omega > one {
        rou_shift(lam, omega, rng)
    } else if omega >= T::lit(0.5).min(T::lit(2.0 / 3.0) * (one - lam).sqrt()) {
        rou_noshift(lam, omega, rng)
    } else {
        hat_rejection(lam, omega, rng)
    }
}

fn rou_noshift<T: Scalar, R: Rng + ?Sized>(lam: T, omega: T, rng: &mut R) -> T {
    let half = T::lit(0.5);
    let t = half * (lam - T::one());
    let s = T::lit(0.25) * omega;
    let xm = mode(lam, omega);
    let nc = t * xm.ln() - s * (xm + T::one() / xm);
    let lp1 = lam + T::one();
    let ym = (lp1 + (lp1 * lp1 + omega * omega).sqrt()) / omega;
    let um = (half * lp1 * ym.ln() - s * (ym + T::one() / ym) - nc).exp();
    loop {
        let u = um * T::open01(rng);
        let v = T::open01(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + T::one() / x) - nc {
            return x;
        }
    }
}

fn rou_shift<T: Scalar, R: Rng + ?Sized>(lam: T, omega: T, rng: &mut R) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let t = T::lit(0.5) * (lam - one);
    let s = T::lit(0.25) * omega;
    let xm = mode(lam, omega);
    let nc = t * xm.ln() - s * (xm + one / xm);
    // extremes of (x − m)√f(x) are roots of a depressed cubic
    let a = -(two * (lam + one) / omega + xm);
    let b = two * (lam - one) * xm / omega - one;
    let c = xm;
    let p = b - a * a / three;
    let q = two * a * a * a / T::lit(27.0) - a * b / three + c;
    let fi = (-q / (two * (-p * p * p / T::lit(27.0)).sqrt())).max(-one).min(one).acos();
    let fak = two * (-p / three).sqrt();
    let y1 = fak * (fi / three).cos() - a / three;
    let y2 = fak * (fi / three + T::lit(4.0) * T::PI() / three).cos() - a / three;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + one / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + one / y2) - nc).exp();
    loop {
        let u = uminus + T::open01(rng) * (uplus - uminus);
        let v = T::open01(rng);
        let x = u / v + xm;
        if x <= T::zero() {
            continue;
        }
        if v.ln() <= t * x.ln() - s * (x + one / x) - nc {
            return x;
        }
    }
}

/// Rejection from a hat that is constant near zero, `∝ x^{λ−1}` in the
/// middle and exponential in the tail; valid for 0 ≤ λ < 1.
fn hat_rejection<T: Scalar, R: Rng + ?Sized>(lam: T, omega: T, rng: &mut R) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let lm1 = lam - one;
    let log_g = |x: T| lm1 * x.ln() - half * omega * (x + one / x);
    let xm = mode(lam, omega);
    let x0 = omega / (one - lam);
    let k0 = log_g(xm).exp();
    let a0 = k0 * x0;
    let two_over_w = two / omega;
    let (k1, a1, k2, a2) = if x0 >= two_over_w {
        let k2 = (lm1 * x0.ln()).exp();
        (T::zero(), T::zero(), k2, k2 * two * (-half * omega * x0).exp() / omega)
    } else {
        let k1 = (-omega).exp();
        let span = two_over_w.ln() - x0.ln();
        let a1 = if lam == T::zero() {
            k1 * span
        } else {
            k1 * (lam * x0.ln()).exp() * (lam * span).exp_m1() / lam
        };
        let k2 = (lm1 * two_over_w.ln()).exp();
        (k1, a1, k2, k2 * two * (-one).exp() / omega)
    };
    let total = a0 + a1 + a2;
    let tail_start = x0.max(two_over_w);
    loop {
        let mut v = total * T::open01(rng);
        let (x, hx) = if v <= a0 {
            (x0 * v / a0, k0)
        } else if v <= a0 + a1 {
            v -= a0;
            let x = if lam == T::zero() {
                x0 * (v / k1).exp()
            } else {
                let x0l = (lam * x0.ln()).exp();
                x0 * ((lam * v / (k1 * x0l)).ln_1p() / lam).exp()
            };
            (x, k1 * (lm1 * x.ln()).exp())
        } else {
            v -= a0 + a1;
            let inner = (-half * omega * tail_start).exp() - omega * v / (two * k2);
            let x = -two_over_w * inner.ln();
            (x, k2 * (-half * omega * x).exp())
        };
        if !(x > T::zero()) || !x.is_finite() {
            continue;
        }
        let u = T::open01(rng) * hx;
        if u.ln() <= log_g(x) {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_and_se(params: GigParams<f64>, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..n).map(|_| gig_sample(params, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (m, (v / n as f64).sqrt())
    }

    #[test]
    fn gamma_case_mean() {
        let (m, se) = mean_and_se(GigParams::new(2.0, 2.0, 0.0).unwrap(), 1_000_000, 1);
        assert!((m - 2.0).abs() < 3.0 * se);
    }

    #[test]
    fn inverse_gaussian_case_mean() {
        let (m, se) = mean_and_se(GigParams::new(-0.5, 2.0, 2.0).unwrap(), 1_000_000, 2);
        assert!((m - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn every_branch_hits_its_mean() {
        // (λ, ω) chosen to land in the shifted, unshifted and hat branches
        for (i, &(p, a, b)) in [(2.5, 1.0, 4.0), (0.8, 0.6, 0.6), (0.3, 0.1, 0.1), (0.0, 0.02, 0.05), (-1.0, 2.0, 9.0), (-0.2, 0.3, 0.2)]
            .iter()
            .enumerate()
        {
            let params = GigParams::new(p, a, b).unwrap();
            let want = super::super::gig_moment(params, 1.0).unwrap();
            let (m, se) = mean_and_se(params, 200_000, 10 + i as u64);
            assert!((m - want).abs() < 4.0 * se, "{p} {a} {b}: {m} vs {want} (se {se})");
        }
    }

    #[test]
    fn seeded_replay() {
        let params = GigParams::new(0.4, 1.0, 3.0).unwrap();
        let a: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| gig_sample(params, &mut r).unwrap()).collect()
        };
        let b: Vec<f64> = {
            let mut r = ChaCha8Rng::seed_from_u64(5);
            (0..10).map(|_| gig_sample(params, &mut r).unwrap()).collect()
        };
        assert_eq!(a, b);
    }
}
