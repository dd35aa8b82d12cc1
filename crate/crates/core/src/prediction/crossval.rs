use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::inference::{mcem_fit, GibbsConfig, GibbsSampler, McemConfig, Problem};
use crate::mesh::{Mesh, ObservationMatrix};
use crate::model::{Dataset, ModelParams};
use crate::Scalar;

use super::krige::{Kriger, PredictMode};
use super::score::{crps_mc, energy_score_mc, residual_summaries, Scores};
use super::PredictionError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefitPolicy {
    /// Every fold uses the supplied parameters.
    #[default]
    Reuse,
    /// Every fold is refitted from the supplied parameters.
    Refit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossValConfig {
    pub folds: usize,
    pub seed: u64,
    pub gibbs: GibbsConfig,
    pub policy: RefitPolicy,
    pub mcem: McemConfig,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        Self { folds: 10, seed: 0, gibbs: GibbsConfig::default(), policy: RefitPolicy::Reuse, mcem: McemConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow<T> {
    pub index: usize,
    pub fold: usize,
    pub mean: T,
    pub var: T,
    pub r: T,
    pub r_s: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValResult<T> {
    pub scores: Scores<T>,
    /// One row per observation, in the original order.
    pub residuals: Vec<ResidualRow<T>>,
}

/// Random permutation of `0..n` cut into `folds` groups whose sizes differ
/// by at most one.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, PredictionError> {
    if folds == 0 || n < folds {
        return Err(PredictionError::FoldTooSmall { folds, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

fn subset<T: Scalar>(data: &Dataset<T>, rows: &[usize]) -> Dataset<T> {
    Dataset {
        locations: rows.iter().map(|&i| data.locations[i]).collect(),
        y: rows.iter().map(|&i| data.y[i]).collect(),
        b: data.b.select_rows(rows),
        b_gamma: data.b_gamma.clone(),
        b_mu: data.b_mu.clone(),
    }
}

struct FoldOutcome<T> {
    rows: Vec<usize>,
    mean: Vec<T>,
    var: Vec<T>,
    crps_sum: T,
    energy: T,
}

fn run_fold<T: Scalar>(
    mesh: &Mesh<T>,
    data: &Dataset<T>,
    params: &ModelParams<T>,
    config: &CrossValConfig,
    fold: usize,
    test: &[usize],
) -> Result<FoldOutcome<T>, PredictionError> {
    let mut in_test = vec![false; data.y.len()];
    for &i in test {
        in_test[i] = true;
    }
    let train: Vec<usize> = (0..data.y.len()).filter(|&i| !in_test[i]).collect();
    let problem = Problem::new(mesh.clone(), subset(data, &train))?;
    let theta = match config.policy {
        RefitPolicy::Reuse => params.clone(),
        RefitPolicy::Refit => {
            let mut mc = config.mcem;
            mc.seed = mc.seed.wrapping_add(fold as u64);
            mcem_fit(&problem, params, &mc)?.params
        }
    };
    let held = subset(data, test);
    let ap = ObservationMatrix::build(mesh, &held.locations)?;
    let offset = held.b.mul_vec(&theta.beta);
    let mut kr = Kriger::new(ap, offset, PredictMode::Both)?
        .with_draws(theta.sigma_eps, config.gibbs.seed.wrapping_add(0x5eed).wrapping_add(fold as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(config.gibbs.seed);
    rng.set_stream(fold as u64 + 1);
    let g = &config.gibbs;
    g.validate()?;
    let mut sampler = GibbsSampler::new(&theta, &problem, None)?;
    sampler.run(&problem, g.samples, g.burn_in, g.thinning, false, false, &mut [&mut kr], &mut rng)?;
    let res = kr.result(held.locations.clone());
    let s2 = theta.sigma_eps * theta.sigma_eps;
    let var = res.var_rb.iter().map(|&v| v + s2).collect();
    let crps_sum = crps_mc(kr.draws(), &held.y)? * T::from_count(test.len());
    let energy = energy_score_mc(kr.draws(), &held.y)?;
    Ok(FoldOutcome { rows: test.to_vec(), mean: res.mean_rb, var, crps_sum, energy })
}

/// K-fold cross-validation of y-scale predictions. Folds run in parallel,
/// each on its own random stream.
pub fn crossval<T: Scalar>(
    mesh: &Mesh<T>,
    data: &Dataset<T>,
    params: &ModelParams<T>,
    config: &CrossValConfig,
) -> Result<CrossValResult<T>, PredictionError> {
    let n = data.y.len();
    let parts = fold_partition(n, config.folds, config.seed)?;
    let outcomes = parts
        .par_iter()
        .enumerate()
        .map(|(f, test)| run_fold(mesh, data, params, config, f, test))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = vec![None; n];
    let mut crps = T::zero();
    let mut energy = T::zero();
    for (f, o) in outcomes.iter().enumerate() {
        crps += o.crps_sum;
        energy += o.energy;
        for (j, &i) in o.rows.iter().enumerate() {
            let r = data.y[i] - o.mean[j];
            rows[i] = Some(ResidualRow { index: i, fold: f, mean: o.mean[j], var: o.var[j], r, r_s: r / o.var[j].sqrt() });
        }
    }
    let residuals: Vec<ResidualRow<T>> = rows.into_iter().map(|r| r.expect("every index lies in one fold")).collect();
    let r: Vec<T> = residuals.iter().map(|x| x.r).collect();
    let v: Vec<T> = residuals.iter().map(|x| x.var).collect();
    let s = residual_summaries(&r, &v)?;
    let scores = Scores {
        var_rs: s.var_rs,
        mean_r: s.mean_r,
        var_r: s.var_r,
        mean_abs_r: s.mean_abs_r,
        crps: crps / T::from_count(n),
        energy: energy / T::from_count(outcomes.len()),
    };
    Ok(CrossValResult { scores, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions() {
        let p = fold_partition(1000, 10, 3).unwrap();
        assert!(p.iter().all(|f| f.len() == 100));
        let mut all: Vec<usize> = p.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(fold_partition(7, 7, 0).unwrap().iter().all(|f| f.len() == 1));
        assert_eq!(fold_partition(23, 4, 1).unwrap(), fold_partition(23, 4, 1).unwrap());
        assert!(matches!(fold_partition(3, 4, 0), Err(PredictionError::FoldTooSmall { .. })));
    }
}
