//! One-dimensional maximizers.

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum<T> {
    pub x: T,
    pub value: T,
    /// True when the maximizer sits at an end of the search interval.
    pub at_edge: bool,
}

/// Golden-section search for the maximum of `f` on `[lo, hi]`, stopping
/// when the bracket is narrower than `tol`. The end points are evaluated
/// too so a monotone objective reports its best edge.
pub fn golden_section_max<T: Scalar, E>(
    mut f: impl FnMut(T) -> Result<T, E>,
    lo: T,
    hi: T,
    tol: T,
) -> Result<Maximum<T>, E> {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..500 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d)?;
        }
    }
    let (mut x, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    let mut at_edge = false;
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if flo > value {
        x = lo;
        value = flo;
        at_edge = true;
    }
    if fhi > value {
        x = hi;
        value = fhi;
        at_edge = true;
    }
    Ok(Maximum { x, value, at_edge })
}

/// Root of a decreasing function `g` on `(lo, hi)` with `g(lo) > 0 > g(hi)`,
/// by Newton steps that fall back to bisection when they leave the bracket.
/// `dg` is the derivative of `g`. Stops when `|g| < tol` or the bracket
/// collapses.
pub fn safeguarded_newton<T: Scalar>(
    mut g: impl FnMut(T) -> T,
    mut dg: impl FnMut(T) -> T,
    mut lo: T,
    mut hi: T,
    tol: T,
) -> T {
    let half = T::lit(0.5);
    let mut x = (lo + hi) * half;
    for _ in 0..500 {
        let gx = g(x);
        if gx.abs() < tol {
            return x;
        }
        if gx > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let step = gx / dg(x);
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) * half;
        }
        if (hi - lo).abs() <= T::epsilon() * x.abs() {
            return next;
        }
        x = next;
    }
    x
}
