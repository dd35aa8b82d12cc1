//! The floating-point abstraction every numerical routine is written against.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

/// Real scalar type accepted by the library: `f32` or `f64`.
///
/// Besides the usual `num_traits` arithmetic this carries the few special
/// functions and random variates that have no generic implementation in the
/// ecosystem crates.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    /// Converts an `f64` literal, rounding if needed.
    fn lit(x: f64) -> Self;

    /// Converts a count or index.
    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Natural log of the gamma function for positive arguments.
    fn log_gamma(self) -> Self;

    fn digamma(self) -> Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform draw on the open interval (0, 1).
    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Gamma(shape, rate 1) variate. `shape` must be positive.
    fn gamma_variate<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    fn log_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }

    fn digamma(self) -> Self {
        statrs::function::gamma::digamma(self)
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn gamma_variate<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
        Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive")
            .sample(rng)
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    fn log_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self as f64) as f32
    }

    fn digamma(self) -> Self {
        statrs::function::gamma::digamma(self as f64) as f32
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn gamma_variate<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
        Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive")
            .sample(rng)
    }
}

/// Trigamma function ψ'(x) for x > 0 via upward recurrence and the
/// asymptotic expansion.
pub fn trigamma<T: Scalar>(x: T) -> T {
    let mut x = x;
    let mut acc = T::zero();
    let shift_to = T::lit(12.0);
    while x < shift_to {
        acc += T::one() / (x * x);
        x += T::one();
    }
    let inv = T::one() / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9) + 5/(66x^11)
    let series = inv
        + inv2 / T::lit(2.0)
        + inv * inv2
            * (T::lit(1.0 / 6.0)
                + inv2
                    * (T::lit(-1.0 / 30.0)
                        + inv2 * (T::lit(1.0 / 42.0) + inv2 * (T::lit(-1.0 / 30.0) + inv2 * T::lit(5.0 / 66.0)))));
    acc + series
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trigamma_known_values() {
        // ψ'(1) = π²/6, ψ'(1/2) = π²/2
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((trigamma(1.0f64) - pi2 / 6.0).abs() < 1e-13);
        assert!((trigamma(0.5f64) - pi2 / 2.0).abs() < 1e-12);
        assert!((trigamma(30.0f64) - 0.033895060357739944).abs() < 1e-15);
        assert!((trigamma(0.1f64) - 101.43329915079275).abs() < 1e-11);
        assert!((trigamma(2.5f64) - 0.49035775610023486).abs() < 1e-14);
    }

    #[test]
    fn special_functions_on_f32() {
        assert!((4.0f32.log_gamma() - 6.0f32.ln()).abs() < 1e-5);
        assert!((1.0f32.digamma() + 0.577_215_7).abs() < 1e-5);
    }
}
