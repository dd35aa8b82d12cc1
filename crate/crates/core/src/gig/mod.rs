//! Generalized inverse Gaussian law GIG(p, a, b) with density proportional
//! to `x^{p−1} exp(−(a x + b/x)/2)` on `(0, ∞)`.

mod bessel;
mod sample;

use thiserror::Error;

use crate::Scalar;

pub use bessel::{log_bessel_k, log_bessel_k_ratio};
pub use sample::gig_sample;

/// Step of the central difference used for `∂/∂p log K_p`.
pub const LOG_MOMENT_STEP: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GigError {
    #[error("invalid GIG parameters p={p}, a={a}, b={b}")]
    InvalidParams { p: f64, a: f64, b: f64 },
    #[error("Bessel K needs a positive argument, got {0}")]
    NonPositiveArgument(f64),
    #[error("moment of order {lambda} is infinite for p={p}, a={a}, b={b}")]
    MomentUndefined { p: f64, a: f64, b: f64, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GigParams<T> {
    pub p: T,
    pub a: T,
    pub b: T,
}

/// Which closed form a parameter triple falls under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// b = 0: Gamma(p, rate a/2).
    Gamma,
    /// a = 0: inverse Gamma(−p, scale b/2).
    InvGamma,
    General,
}

impl<T: Scalar> GigParams<T> {
    pub fn new(p: T, a: T, b: T) -> Result<Self, GigError> {
        let s = Self { p, a, b };
        s.validate()?;
        Ok(s)
    }

    fn invalid(&self) -> GigError {
        GigError::InvalidParams { p: self.p.as_f64(), a: self.a.as_f64(), b: self.b.as_f64() }
    }

    pub fn validate(&self) -> Result<(), GigError> {
        let (p, a, b) = (self.p, self.a, self.b);
        let z = T::zero();
        let finite = p.is_finite() && a.is_finite() && b.is_finite();
        let ok = finite
            && a >= z
            && b >= z
            && if p > z {
                a > z
            } else if p < z {
                b > z
            } else {
                a > z && b > z
            };
        if ok {
            Ok(())
        } else {
            Err(self.invalid())
        }
    }

    fn kind(&self) -> Kind {
        if self.b == T::zero() {
            Kind::Gamma
        } else if self.a == T::zero() {
            Kind::InvGamma
        } else {
            Kind::General
        }
    }

    /// `√(ab)`, the argument of the Bessel functions.
    pub fn omega(&self) -> T {
        (self.a * self.b).sqrt()
    }
}

/// Checked `log K_ν(x)`.
pub fn try_log_bessel_k<T: Scalar>(order: T, x: T) -> Result<T, GigError> {
    if !(x > T::zero()) {
        return Err(GigError::NonPositiveArgument(x.as_f64()));
    }
    Ok(log_bessel_k(order, x))
}

/// Log density at `x > 0`.
pub fn gig_logpdf<T: Scalar>(params: GigParams<T>, x: T) -> Result<T, GigError> {
    params.validate()?;
    let GigParams { p, a, b } = params;
    let half = T::lit(0.5);
    if !(x > T::zero()) {
        return Ok(T::neg_infinity());
    }
    let lx = x.ln();
    Ok(match params.kind() {
        Kind::Gamma => p * (a * half).ln() - p.log_gamma() + (p - T::one()) * lx - a * x * half,
        Kind::InvGamma => {
            let s = -p;
            s * (b * half).ln() - s.log_gamma() + (p - T::one()) * lx - b / x * half
        }
        Kind::General => {
            p * half * (a / b).ln() - T::LN_2() - log_bessel_k(p, params.omega()) + (p - T::one()) * lx
                - (a * x + b / x) * half
        }
    })
}

/// `E[V^λ]`; negative λ allowed.
pub fn gig_moment<T: Scalar>(params: GigParams<T>, lambda: T) -> Result<T, GigError> {
    params.validate()?;
    let GigParams { p, a, b } = params;
    let half = T::lit(0.5);
    let undefined = || GigError::MomentUndefined { p: p.as_f64(), a: a.as_f64(), b: b.as_f64(), lambda: lambda.as_f64() };
    let log_m = match params.kind() {
        Kind::Gamma => {
            if !(p + lambda > T::zero()) {
                return Err(undefined());
            }
            (p + lambda).log_gamma() - p.log_gamma() - lambda * (a * half).ln()
        }
        Kind::InvGamma => {
            let s = -p;
            if !(s - lambda > T::zero()) {
                return Err(undefined());
            }
            (s - lambda).log_gamma() - s.log_gamma() + lambda * (b * half).ln()
        }
        Kind::General => {
            let w = params.omega();
            lambda * half * (b / a).ln() + log_bessel_k(p + lambda, w) - log_bessel_k(p, w)
        }
    };
    Ok(log_m.exp())
}

/// `E[log V]` with the default finite-difference step.
pub fn gig_expect_log<T: Scalar>(params: GigParams<T>) -> Result<T, GigError> {
    gig_expect_log_step(params, T::lit(LOG_MOMENT_STEP))
}

/// `E[log V] = ½ log(b/a) + ∂/∂p log K_p(√(ab))`, the derivative taken by a
/// central difference with step `eps`. The Gamma and inverse-Gamma limits
/// use the digamma function.
pub fn gig_expect_log_step<T: Scalar>(params: GigParams<T>, eps: T) -> Result<T, GigError> {
    params.validate()?;
    let GigParams { p, a, b } = params;
    let half = T::lit(0.5);
    Ok(match params.kind() {
        Kind::Gamma => p.digamma() - (a * half).ln(),
        Kind::InvGamma => (b * half).ln() - (-p).digamma(),
        Kind::General => {
            let w = params.omega();
            let d = (log_bessel_k(p + eps, w) - log_bessel_k(p - eps, w)) / (eps + eps);
            half * (b / a).ln() + d
        }
    })
}

/// `(E[V], E[V⁻¹], E[log V])` sharing Bessel evaluations. `E[V⁻¹]` is
/// `None` where it diverges; `E[log V]` is computed only when `with_log`.
pub fn gig_first_moments<T: Scalar>(params: GigParams<T>, with_log: bool) -> Result<(T, Option<T>, Option<T>), GigError> {
    params.validate()?;
    let GigParams { p, a, b } = params;
    if params.kind() != Kind::General {
        let e_v = gig_moment(params, T::one())?;
        let e_inv = gig_moment(params, -T::one()).ok();
        let e_log = if with_log { Some(gig_expect_log(params)?) } else { None };
        return Ok((e_v, e_inv, e_log));
    }
    let w = params.omega();
    let (log_k, up) = log_bessel_k_ratio(p, w);
    let one = T::one();
    let s = p.abs();
    // K_{p+1}/K_p and K_{p−1}/K_p through K_{−ν} = K_ν
    let ratio_up = if p >= T::zero() {
        up
    } else if s >= one {
        one / log_bessel_k_ratio(s - one, w).1
    } else {
        (log_bessel_k(one - s, w) - log_k).exp()
    };
    let ratio_down = if p <= T::zero() {
        up
    } else if p >= one {
        one / log_bessel_k_ratio(p - one, w).1
    } else {
        (log_bessel_k(one - p, w) - log_k).exp()
    };
    let root = (b / a).sqrt();
    let e_log = if with_log { Some(gig_expect_log(params)?) } else { None };
    Ok((root * ratio_up, Some(ratio_down / root), e_log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(p: f64, a: f64, b: f64) -> GigParams<f64> {
        GigParams::new(p, a, b).unwrap()
    }

    #[test]
    fn parameter_domain() {
        assert!(GigParams::new(1.0, 0.0, 1.0).is_err());
        assert!(GigParams::new(-1.0, 1.0, 0.0).is_err());
        assert!(GigParams::new(0.0, 1.0, 0.0).is_err());
        assert!(GigParams::new(0.0, 1.0, 1.0).is_ok());
        assert!(GigParams::new(-0.5, 0.0, 1.0).is_ok());
        assert!(GigParams::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn exponential_density() {
        assert!((gig_logpdf(gp(1.0, 2.0, 0.0), 1.0).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_gaussian_density() {
        // IG with mean m and shape s equals GIG(-1/2, s/m², s)
        let (m, s) = (1.7f64, 2.3f64);
        let params = gp(-0.5, s / (m * m), s);
        for x in [0.05f64, 0.4, 1.0, 2.2, 9.0] {
            let ig = 0.5 * (s / (2.0 * std::f64::consts::PI * x.powi(3))).ln() - s * (x - m).powi(2) / (2.0 * m * m * x);
            assert!((gig_logpdf(params, x).unwrap() - ig).abs() < 1e-10);
        }
    }

    #[test]
    fn moments() {
        assert!((gig_moment(gp(-0.5, 2.0, 2.0), 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gig_moment(gp(2.0, 2.0, 0.0), 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(gig_moment(gp(2.0, 2.0, 0.0), -2.0), Err(GigError::MomentUndefined { .. })));
        // inverse gamma with shape 3, scale 1: mean 1/2
        assert!((gig_moment(gp(-3.0, 0.0, 2.0), 1.0).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gamma_limit_is_continuous() {
        for (p, lam) in [(1.5, 1.0), (2.5, -1.0), (3.0, 2.0), (0.7, 1.0)] {
            let near = gig_moment(gp(p, 2.0, 1e-12), lam).unwrap();
            let at = gig_moment(gp(p, 2.0, 0.0), lam).unwrap();
            assert!((near - at).abs() < 1e-6 * at.abs().max(1.0), "{p} {lam}: {near} vs {at}");
        }
    }

    #[test]
    fn log_moments() {
        assert!((gig_expect_log(gp(1.0, 2.0, 0.0)).unwrap() + 0.577_215_664_901_532_9).abs() < 1e-12);
        let params = gp(-0.5, 2.0, 2.0);
        let a = gig_expect_log_step(params, 1e-5).unwrap();
        let b = gig_expect_log_step(params, 1e-6).unwrap();
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn first_moments_match_separate_evaluations() {
        for p in [-2.7, -1.0, -0.6, -0.5, 0.0, 0.25, 0.8, 1.0, 3.4] {
            for (a, b) in [(2.0, 0.01), (2.0, 1.3), (0.5, 9.0), (7.0, 40.0)] {
                let params = gp(p, a, b);
                let (ev, einv, elog) = gig_first_moments(params, true).unwrap();
                let want = [gig_moment(params, 1.0).unwrap(), gig_moment(params, -1.0).unwrap()];
                for (got, want) in [ev, einv.unwrap()].into_iter().zip(want) {
                    assert!(((got - want) / want).abs() < 1e-12, "p={p} a={a} b={b}: {got} vs {want}");
                }
                assert_eq!(elog, Some(gig_expect_log(params).unwrap()));
            }
        }
        let (_, einv, elog) = gig_first_moments(gp(0.7, 2.0, 0.0), false).unwrap();
        assert_eq!((einv, elog), (None, None));
    }
}
