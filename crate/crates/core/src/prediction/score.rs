use serde::{Deserialize, Serialize};

use crate::Scalar;

use super::PredictionError;

/// Residual statistics plus the two scoring rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores<T> {
    pub var_rs: T,
    pub mean_r: T,
    pub var_r: T,
    pub mean_abs_r: T,
    pub crps: T,
    pub energy: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary<T> {
    pub var_rs: T,
    pub mean_r: T,
    pub var_r: T,
    pub mean_abs_r: T,
}

fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::from_count(x.len().max(1))
}

/// Population variance.
fn variance<T: Scalar>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(x.len().max(1))
}

/// Standardizes `r` by `√pred_var` and summarizes both.
pub fn residual_summaries<T: Scalar>(r: &[T], pred_var: &[T]) -> Result<ResidualSummary<T>, PredictionError> {
    if r.len() != pred_var.len() {
        return Err(PredictionError::DimensionMismatch(format!("{} residuals, {} variances", r.len(), pred_var.len())));
    }
    if let Some(index) = pred_var.iter().position(|&v| !(v > T::zero())) {
        return Err(PredictionError::NonPositiveVariance { index });
    }
    let rs: Vec<T> = r.iter().zip(pred_var).map(|(&a, &v)| a / v.sqrt()).collect();
    let abs: Vec<T> = r.iter().map(|v| v.abs()).collect();
    Ok(ResidualSummary { var_rs: variance(&rs), mean_r: mean(r), var_r: variance(r), mean_abs_r: mean(&abs) })
}

/// Mean over unordered pairs of `|x_i − x_j|`, via sorting.
fn mean_pair_distance<T: Scalar>(x: &[T]) -> T {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = s.len();
    let total: T = s
        .iter()
        .enumerate()
        .map(|(j, &v)| v * (T::from_count(2 * j) - T::from_count(k - 1)))
        .sum();
    total / T::from_count(k * (k - 1) / 2)
}

/// Sample CRPS averaged over locations. `samples[i]` holds the predictive
/// draws for location `i`.
pub fn crps_mc<T: Scalar>(samples: &[Vec<T>], y: &[T]) -> Result<T, PredictionError> {
    if samples.len() != y.len() {
        return Err(PredictionError::DimensionMismatch(format!("{} sample sets, {} observations", samples.len(), y.len())));
    }
    let mut total = T::zero();
    for (s, &yi) in samples.iter().zip(y) {
        if s.len() < 2 {
            return Err(PredictionError::TooFewSamples(s.len()));
        }
        let e_abs = s.iter().map(|&v| (yi - v).abs()).sum::<T>() / T::from_count(s.len());
        total += e_abs - T::lit(0.5) * mean_pair_distance(s);
    }
    Ok(total / T::from_count(y.len().max(1)))
}

/// Sample energy score of joint draws: draw `j` is `(samples[i][j])_i`.
pub fn energy_score_mc<T: Scalar>(samples: &[Vec<T>], y: &[T]) -> Result<T, PredictionError> {
    if samples.len() != y.len() {
        return Err(PredictionError::DimensionMismatch(format!("{} sample sets, {} observations", samples.len(), y.len())));
    }
    let k = samples.first().map_or(0, |s| s.len());
    if k < 2 {
        return Err(PredictionError::TooFewSamples(k));
    }
    if samples.iter().any(|s| s.len() != k) {
        return Err(PredictionError::DimensionMismatch("joint draws must share one count".into()));
    }
    let draw = |j: usize| samples.iter().map(move |s| s[j]);
    let mut obs = T::zero();
    for j in 0..k {
        obs += draw(j).zip(y).map(|(v, &yi)| (v - yi) * (v - yi)).sum::<T>().sqrt();
    }
    let mut pair = T::zero();
    for a in 0..k {
        for b in (a + 1)..k {
            pair += draw(a).zip(draw(b)).map(|(u, v)| (u - v) * (u - v)).sum::<T>().sqrt();
        }
    }
    Ok(obs / T::from_count(k) - T::lit(0.5) * pair / T::from_count(k * (k - 1) / 2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_forecast() {
        let s = vec![vec![2.0f64; 5], vec![2.0; 5]];
        assert!((crps_mc(&s, &[1.0, 4.0]).unwrap() - 1.5).abs() < 1e-15);
        assert!((energy_score_mc(&s, &[1.0, 4.0]).unwrap() - 5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(crps_mc(&[vec![1.0f64]], &[0.0]), Err(PredictionError::TooFewSamples(1))));
    }

    #[test]
    fn pair_distance_matches_brute_force() {
        let x = [0.3f64, -1.2, 4.0, 2.2, 0.0];
        let mut brute = 0.0;
        for i in 0..5 {
            for j in (i + 1)..5 {
                brute += (x[i] - x[j]).abs();
            }
        }
        assert!((mean_pair_distance(&x) - brute / 10.0).abs() < 1e-14);
    }

    #[test]
    fn residual_cases() {
        let s = residual_summaries(&[1.0f64; 4], &[1.0; 4]).unwrap();
        assert_eq!((s.var_rs, s.mean_abs_r, s.mean_r, s.var_r), (0.0, 1.0, 1.0, 0.0));
        let r = [0.5f64, -1.0, 2.0, 0.1];
        let a = residual_summaries(&r, &[1.0; 4]).unwrap();
        let b = residual_summaries(&r, &[4.0; 4]).unwrap();
        assert!((a.var_rs / 4.0 - b.var_rs).abs() < 1e-15);
        assert!(matches!(residual_summaries(&r, &[1.0, 0.0, 1.0, 1.0]), Err(PredictionError::NonPositiveVariance { index: 1 })));
    }
}
