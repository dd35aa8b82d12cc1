use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, solve_spd, Matrix};
use crate::inference::{
    gaussian_start, mcem_fit, GibbsConfig, GibbsSampler, InferenceError, Problem, Termination,
};
use crate::mesh::{read_locations, FemOperators, MeshError, ObservationMatrix};
use crate::model::{simulate_latent, simulate_observations, Dataset, Driver, ModelError, ModelParams};
use crate::prediction::{crossval, CrossValConfig, Kriger, PredictMode, PredictionError};
use crate::Scalar;

use super::config::{MeshSpec, PredictSpec, RunConfig, Scale};
use super::data::load_dataset;
use super::output::{header, num, to_json, write_csv, write_json};
use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    None,
    Sqrt,
}

impl Transform {
    pub fn apply(self, y: &mut [f64]) -> Result<(), AppError> {
        if self == Transform::Sqrt {
            for v in y.iter_mut() {
                if *v < 0.0 {
                    return Err(AppError::Config("sqrt transform needs nonnegative observations".into()));
                }
                *v = v.sqrt();
            }
        }
        Ok(())
    }

    /// Moments of `X²` from those of `X`.
    pub fn back(self, mean: f64, var: f64) -> (f64, f64) {
        match self {
            Transform::None => (mean, var),
            Transform::Sqrt => (mean * mean + var, 2.0 * var * var + 4.0 * mean * mean * var),
        }
    }
}

/// Everything needed to rebuild the problem and predict from a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub params: ModelParams<f64>,
    pub mesh: MeshSpec,
    pub covariates: Vec<String>,
    pub transform: Transform,
    pub data: String,
    pub seed: u64,
    pub trace: String,
    pub iterations: usize,
    pub termination: Termination,
    pub warnings: Vec<String>,
    pub gibbs: GibbsConfig,
    pub predict: PredictSpec,
}

impl FittedModel {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self, AppError> {
        let m: FittedModel = serde_json::from_str(text).map_err(|e| AppError::Config(format!("model file: {e}")))?;
        m.params.validate().map_err(|e| AppError::Config(e.to_string()))?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn inference_error(e: InferenceError) -> AppError {
    match e {
        InferenceError::InvalidConfig(m) => AppError::Config(m),
        InferenceError::Mesh(e @ MeshError::LocationOutsideMesh { .. }) => AppError::Config(e.to_string()),
        InferenceError::Model(e @ ModelError::DimensionMismatch(_)) => AppError::Config(e.to_string()),
        InferenceError::Model(e @ ModelError::InvalidParams(_)) => AppError::Config(e.to_string()),
        other => AppError::Numerical(other.to_string()),
    }
}

fn prediction_error(e: PredictionError) -> AppError {
    match e {
        PredictionError::Inference(e) => inference_error(e),
        e @ PredictionError::FoldTooSmall { .. } => AppError::Config(e.to_string()),
        other => AppError::Numerical(other.to_string()),
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Numerical(e.to_string())
}

fn out_dir(dir: &Path) -> Result<PathBuf, AppError> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

fn coords(p: [f64; 2], dim: usize) -> Vec<String> {
    if dim == 2 {
        vec![num(p[0]), num(p[1])]
    } else {
        vec![num(p[0])]
    }
}

fn coord_header(dim: usize) -> Vec<String> {
    if dim == 2 {
        header(&["x", "y"])
    } else {
        header(&["x"])
    }
}

/// Samples fields at the mesh nodes and, when requested, observations.
/// Writes `field.csv`, `observations.csv` and `truth.json`.
pub fn cmd_simulate(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, AppError> {
    let dir = out_dir(out)?;
    let spec = config.mesh_spec();
    let mesh = spec.build()?;
    let dim = mesh.dim();
    let ops = FemOperators::assemble(&mesh).map_err(numerical)?;
    let n = mesh.n_nodes();
    let model = &config.model;
    let sim = &config.simulate;
    let mut params = model.params(1.0, vec![0.0; model.covariates.len() + 1])?;
    let ones = Matrix::ones(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let reps = sim.replicates.max(1);
    let mut fields = Vec::with_capacity(reps);
    for _ in 0..reps {
        fields.push(simulate_latent(&params, &ops, &ones, &ones, &mut rng).map_err(numerical)?);
    }
    let mut written = Vec::new();
    let field_path = dir.join("field.csv");
    let rows = fields.iter().enumerate().flat_map(|(r, s)| {
        let mesh = &mesh;
        (0..n).map(move |i| {
            let p = mesh.node(i);
            vec![r.to_string(), i.to_string(), num(p[0]), num(p[1]), num(s.w[i]), num(s.v[i])]
        })
    });
    write_csv(&field_path, &header(&["replicate", "node", "x", "y", "w", "v"]), rows)?;
    written.push(field_path);

    let locations: Vec<[f64; 2]> = match &sim.locations {
        Some(p) => {
            let file = std::fs::File::open(p).map_err(|e| AppError::io(Path::new(p), e))?;
            read_locations(file, dim).map_err(|e| AppError::Config(format!("{p}: {e}")))?
        }
        None => (0..sim.n_obs).map(|_| spec.domain.uniform(&mut rng)).collect(),
    };
    if !locations.is_empty() {
        if model.sigma_eps.is_none() && sim.relative_noise.is_none() {
            return Err(AppError::Config("observations need model.sigma_eps or simulate.relative_noise".into()));
        }
        let m = locations.len();
        let a = ObservationMatrix::build(&mesh, &locations).map_err(|e| AppError::Config(e.to_string()))?;
        let mut cols = vec![vec![1.0; m]];
        for _ in &model.covariates {
            cols.push((0..m).map(|_| f64::standard_normal(&mut rng)).collect());
        }
        let b = Matrix::from_columns(&cols).expect("equal columns");
        let w = &fields[0].w;
        if let Some(f) = sim.relative_noise {
            let aw = a.mul_vec(w);
            let mean = aw.iter().sum::<f64>() / m as f64;
            let sd = (aw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64).sqrt();
            params.sigma_eps = f * sd;
        }
        let y = simulate_observations(&params, &a, &b, w, &mut rng).map_err(numerical)?;
        let mut head = coord_header(dim);
        head.extend(model.covariates.iter().cloned());
        head.push("obs".into());
        let obs_path = dir.join("observations.csv");
        let rows = (0..m).map(|i| {
            let mut r = coords(locations[i], dim);
            r.extend((1..b.cols()).map(|j| num(b.get(i, j))));
            r.push(num(y[i]));
            r
        });
        write_csv(&obs_path, &head, rows)?;
        written.push(obs_path);
    }
    let truth_path = dir.join("truth.json");
    write_json(&truth_path, &params)?;
    written.push(truth_path);
    Ok(written)
}

fn load_training(
    path: &Path,
    mesh_n: usize,
    dim: usize,
    covariates: &[String],
    transform: Transform,
) -> Result<Dataset<f64>, AppError> {
    let loaded = load_dataset(path, dim, covariates, true)?;
    let mut data = loaded.dataset(mesh_n);
    if data.y.is_empty() {
        return Err(AppError::Config(format!("{}: no observations", path.display())));
    }
    transform.apply(&mut data.y)?;
    Ok(data)
}

/// Least-squares β and residual scale used when the config gives none.
fn default_regression(data: &Dataset<f64>) -> Result<(Vec<f64>, f64), AppError> {
    let gram = data.b.gram();
    let rhs = data.b.transpose_mul(&data.y);
    let beta = solve_spd(&gram, &rhs).ok_or_else(|| AppError::Config("covariate design is rank deficient".into()))?;
    let n = data.y.len() as f64;
    let resid: Vec<f64> = (0..data.y.len()).map(|i| data.y[i] - dot(data.b.row(i), &beta)).collect();
    let sd = (resid.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    Ok((beta, 0.5 * sd.max(f64::MIN_POSITIVE)))
}

fn initial_params(config: &RunConfig, data: &Dataset<f64>) -> Result<ModelParams<f64>, AppError> {
    let (beta, sigma_eps) = default_regression(data)?;
    config.model.params(sigma_eps, beta)
}

/// Runs MCEM and writes `model.json` and `trace.csv`.
pub fn cmd_fit(config: &RunConfig, data_path: &Path, transform: Transform, out: &Path) -> Result<FittedModel, AppError> {
    let dir = out_dir(out)?;
    let spec = config.mesh_spec();
    let mesh = spec.build()?;
    let data = load_training(data_path, mesh.n_nodes(), mesh.dim(), &config.model.covariates, transform)?;
    let mut init = initial_params(config, &data)?;
    let problem = Problem::new(mesh, data).map_err(inference_error)?;
    let mut warnings = Vec::new();
    if config.model.gaussian_start && !matches!(init.noise.driver, Driver::Gaussian) && config.mcem.max_iter > 0 {
        let (start, g) = gaussian_start(&problem, &init, &config.mcem).map_err(inference_error)?;
        warnings.extend(g.warnings.iter().map(|w| format!("gaussian start: {w}")));
        init = start;
    }
    let fit = mcem_fit(&problem, &init, &config.mcem).map_err(inference_error)?;
    warnings.extend(fit.warnings.iter().cloned());

    let trace_path = dir.join("trace.csv");
    let nb = fit.params.beta.len();
    let mut head = header(&["iteration", "samples", "kappa", "sigma", "sigma_eps", "tau", "nu"]);
    head.extend((0..nb).map(|j| format!("beta_{j}")));
    head.extend(header(&["gamma", "mu", "q_rb", "q_mc", "rel_change", "kappa_at_edge"]));
    let rows = fit.trace.iter().map(|r| {
        let p = &r.params;
        let (tau, nu) = match p.noise.driver {
            Driver::Gaussian => (f64::NAN, f64::NAN),
            Driver::Gal { tau } => (tau, f64::NAN),
            Driver::Nig { nu } => (f64::NAN, nu),
        };
        let mut row = vec![r.iteration.to_string(), r.samples.to_string(), num(p.kappa), num(p.noise.sigma), num(p.sigma_eps)];
        row.extend([num(tau), num(nu)]);
        row.extend(p.beta.iter().map(|&b| num(b)));
        row.extend([num(p.noise.gamma[0]), num(p.noise.mu[0]), num(r.q_rb), num(r.q_mc), num(r.rel_change)]);
        row.push(u8::from(r.kappa_at_edge).to_string());
        row
    });
    write_csv(&trace_path, &head, rows)?;

    let data_abs = std::fs::canonicalize(data_path).map_err(|e| AppError::io(data_path, e))?;
    let model = FittedModel {
        params: fit.params,
        mesh: spec,
        covariates: config.model.covariates.clone(),
        transform,
        data: data_abs.display().to_string(),
        seed: config.seed,
        trace: "trace.csv".into(),
        iterations: fit.iterations,
        termination: fit.termination,
        warnings,
        gibbs: config.gibbs,
        predict: config.predict,
    };
    write_json(&dir.join("model.json"), &model)?;
    Ok(model)
}

/// Kriges at the rows of `locations` (or at the training file's rows
/// without observations) and on the plot lattice. Writes
/// `predictions.csv` and `lattice.csv`; returns the indices of locations
/// outside the mesh.
pub fn cmd_predict(
    model_path: &Path,
    locations: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
) -> Result<Vec<usize>, AppError> {
    let dir = out_dir(out)?;
    let model = FittedModel::load(model_path)?;
    let mesh = model.mesh.build()?;
    let dim = mesh.dim();
    let data_path = Path::new(&model.data);
    let data = load_training(data_path, mesh.n_nodes(), dim, &model.covariates, model.transform)?;
    let (target_locs, target_design) = match locations {
        Some(p) => {
            let l = load_dataset(p, dim, &model.covariates, false)?;
            (l.locations, l.design)
        }
        None => {
            let l = load_dataset(data_path, dim, &model.covariates, true)?;
            let idx = l.unobserved();
            (idx.iter().map(|&i| l.locations[i]).collect(), l.design.select_rows(&idx))
        }
    };
    let params = &model.params;
    let problem = Problem::new(mesh, data).map_err(inference_error)?;

    let part = ObservationMatrix::build_partial(&problem.mesh, &target_locs);
    for &i in &part.outside {
        eprintln!("location {i} lies outside the mesh; skipped");
    }
    let offset = target_design.select_rows(&part.inside).mul_vec(&params.beta);
    let lattice = model.mesh.domain.lattice(model.predict.lattice);
    let lat = ObservationMatrix::build_partial(&problem.mesh, &lattice);
    let lat_offset = vec![params.beta[0]; lat.inside.len()];
    let mut kr = Kriger::new(part.matrix, offset, PredictMode::Both).map_err(prediction_error)?;
    let mut kl = Kriger::new(lat.matrix, lat_offset, PredictMode::Rb).map_err(prediction_error)?;

    let g = GibbsConfig { seed: seed.unwrap_or(model.gibbs.seed), ..model.gibbs };
    g.validate().map_err(inference_error)?;
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let mut sampler = GibbsSampler::new(params, &problem, None).map_err(inference_error)?;
    sampler
        .run(&problem, g.samples, g.burn_in, g.thinning, false, false, &mut [&mut kr, &mut kl], &mut rng)
        .map_err(inference_error)?;

    let noise = if model.predict.scale == Scale::Observation { params.sigma_eps * params.sigma_eps } else { 0.0 };
    let finish = |m: f64, v: f64| model.transform.back(m, v + noise);
    let res = kr.result(part.inside.iter().map(|&i| target_locs[i]).collect());
    let mut head = coord_header(dim);
    head.extend(header(&["mean_mc", "mean_rb", "var_mc", "var_rb"]));
    let rows = (0..res.locations.len()).map(|i| {
        let (mm, vm) = finish(res.mean_mc[i], res.var_mc[i]);
        let (mr, vr) = finish(res.mean_rb[i], res.var_rb[i]);
        let mut r = coords(res.locations[i], dim);
        r.extend([num(mm), num(mr), num(vm), num(vr)]);
        r
    });
    write_csv(&dir.join("predictions.csv"), &head, rows)?;

    let lres = kl.result(lat.inside.iter().map(|&i| lattice[i]).collect());
    let rows = (0..lres.locations.len()).map(|i| {
        let (m, v) = finish(lres.mean_rb[i], lres.var_rb[i]);
        let p = lres.locations[i];
        vec![num(p[0]), num(p[1]), num(m), num(v.max(0.0).sqrt())]
    });
    write_csv(&dir.join("lattice.csv"), &header(&["x", "y", "mean", "sd"]), rows)?;
    Ok(part.outside)
}

/// K-fold cross-validation. Writes `scores.json` and `residuals.csv`.
pub fn cmd_crossval(config: &RunConfig, data_path: &Path, transform: Transform, out: &Path) -> Result<(), AppError> {
    let dir = out_dir(out)?;
    let spec = config.mesh_spec();
    let mesh = spec.build()?;
    let data = load_training(data_path, mesh.n_nodes(), mesh.dim(), &config.model.covariates, transform)?;
    let params = match &config.crossval.model {
        Some(p) => FittedModel::load(Path::new(p))?.params,
        None => initial_params(config, &data)?,
    };
    let cv = CrossValConfig {
        folds: config.crossval.folds,
        seed: config.seed,
        gibbs: config.gibbs,
        policy: config.crossval.policy,
        mcem: config.mcem,
    };
    let res = crossval(&mesh, &data, &params, &cv).map_err(prediction_error)?;
    write_json(&dir.join("scores.json"), &res.scores)?;
    let rows = res
        .residuals
        .iter()
        .map(|r| vec![r.index.to_string(), r.fold.to_string(), num(r.r), num(r.r_s)]);
    write_csv(&dir.join("residuals.csv"), &header(&["index", "fold", "r", "r_s"]), rows)
}
