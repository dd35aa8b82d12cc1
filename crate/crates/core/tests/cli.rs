use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use ngfield::app::{cmd_crossval, cmd_fit, cmd_predict, cmd_simulate, load_dataset, AppError, FittedModel, RunConfig, Transform};
use ngfield::model::matern_cov;

fn config(text: &str) -> RunConfig {
    RunConfig::from_json(text).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Header and rows of a CSV file, keyed by column name.
fn read_csv(path: &Path) -> (Vec<String>, Vec<BTreeMap<String, String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let head: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| head.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect();
    (head, rows)
}

fn f(row: &BTreeMap<String, String>, k: &str) -> f64 {
    row[k].parse().unwrap()
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ngfield")).args(args).output().unwrap()
}

const SQUARE: &str = r#"{"domain": {"kind": "rect", "x0": 0, "x1": 3, "y0": 0, "y1": 3}, "edge": 0.25}"#;

#[test]
fn load_dataset_intercept_only() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "d.csv", "x,obs\n0.5,1.0\n1.5,2.0\n2.5,3.0\n");
    let d = load_dataset(&p, 1, &[], true).unwrap();
    assert_eq!(d.locations.len(), 3);
    assert_eq!((d.design.rows(), d.design.cols()), (3, 1));
    assert_eq!(d.obs, vec![Some(1.0), Some(2.0), Some(3.0)]);
}

#[test]
fn load_dataset_named_covariate() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "d.csv", "x,y,elev,obs\n0,0,10,1\n1,0,20,2\n0,1,30,3\n");
    let d = load_dataset(&p, 2, &["elev".to_string()], true).unwrap();
    assert_eq!((d.design.rows(), d.design.cols()), (3, 2));
    assert_eq!(d.design.get(2, 1), 30.0);
    assert_eq!(d.design.get(1, 0), 1.0);
}

#[test]
fn load_dataset_missing_obs_column() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "d.csv", "x,y\n0,0\n");
    match load_dataset(&p, 2, &[], true) {
        Err(AppError::MissingColumn { column, .. }) => assert_eq!(column, "obs"),
        other => panic!("expected MissingColumn, got {other:?}"),
    }
}

#[test]
fn load_dataset_reports_malformed_line() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "d.csv", "x,y,obs\n0,0,1\n1,1,2\n2,zz,3\n");
    match load_dataset(&p, 2, &[], true) {
        Err(AppError::MalformedCsv { line, .. }) => assert_eq!(line, 4),
        other => panic!("expected MalformedCsv, got {other:?}"),
    }
}

#[test]
fn load_dataset_keeps_unobserved_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "d.csv", "x,y,obs\n0,0,1\n1,1,\n2,2,NA\n0.5,0.5,4\n");
    let d = load_dataset(&p, 2, &[], true).unwrap();
    assert_eq!(d.observed(), vec![0, 3]);
    assert_eq!(d.unobserved(), vec![1, 2]);
    assert_eq!(d.dataset(10).y, vec![1.0, 4.0]);
}

#[test]
fn simulate_without_observations_writes_no_observation_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&format!(r#"{{"seed": 3, "mesh": {SQUARE}, "model": {{"family": "nig", "kappa": 2.0, "mu": 0.5}}}}"#));
    let files = cmd_simulate(&cfg, tmp.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, vec!["field.csv", "truth.json"]);
    assert!(!tmp.path().join("observations.csv").exists());
    let (head, rows) = read_csv(&tmp.path().join("field.csv"));
    assert_eq!(head, vec!["replicate", "node", "x", "y", "w", "v"]);
    assert!(rows.iter().all(|r| f(r, "v") > 0.0));
}

#[test]
fn simulate_gaussian_node_variance_matches_matern() {
    let tmp = tempfile::tempdir().unwrap();
    let (kappa, sigma) = (1.5, 1.0);
    let cfg = config(&format!(
        r#"{{"seed": 8, "mesh": {{"domain": {{"kind": "rect", "x0": 0, "x1": 4, "y0": 0, "y1": 4}}, "edge": 0.1}},
            "model": {{"family": "gaussian", "kappa": {kappa}, "sigma": {sigma}}},
            "simulate": {{"replicates": 1000}}}}"#
    ));
    cmd_simulate(&cfg, tmp.path()).unwrap();
    let (_, rows) = read_csv(&tmp.path().join("field.csv"));
    let central = |r: &BTreeMap<String, String>| (1.0..=3.0).contains(&f(r, "x")) && (1.0..=3.0).contains(&f(r, "y"));
    let (mut sum, mut count) = (0.0, 0usize);
    for r in rows.iter().filter(|r| central(r)) {
        sum += f(r, "w").powi(2);
        count += 1;
    }
    let var = sum / count as f64;
    let exact = matern_cov(0.0, kappa, 1.0, sigma, 2).unwrap();
    assert!(((var - exact) / exact).abs() < 0.05, "node variance {var} vs {exact}");
}

#[test]
fn simulate_requires_a_noise_level_for_observations() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&format!(r#"{{"seed": 1, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0}}, "simulate": {{"n_obs": 5}}}}"#));
    assert!(matches!(cmd_simulate(&cfg, tmp.path()), Err(AppError::Config(_))));
}

#[test]
fn fit_without_iterations_echoes_initial_values() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let text = format!(
        r#"{{"seed": 4, "mesh": {SQUARE},
            "model": {{"family": "gal", "kappa": 1.7, "sigma": 0.8, "sigma_eps": 0.3, "beta": [2.5, -1.0],
                       "tau": 2.0, "gamma": -0.4, "mu": 0.6, "covariates": ["elev"]}},
            "simulate": {{"n_obs": 40}},
            "mcem": {{"max_iter": 0}}}}"#
    );
    let cfg = config(&text);
    cmd_simulate(&cfg, &root.join("sim")).unwrap();
    let model = cmd_fit(&cfg, &root.join("sim/observations.csv"), Transform::None, &root.join("fit")).unwrap();
    let truth: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(root.join("sim/truth.json")).unwrap()).unwrap();
    assert_eq!(serde_json::to_value(&model.params).unwrap(), truth);
    assert_eq!(model.iterations, 0);
    let saved = FittedModel::load(&root.join("fit/model.json")).unwrap();
    assert_eq!(saved.params, model.params);
    assert_eq!(saved.to_json(), std::fs::read_to_string(root.join("fit/model.json")).unwrap());
}

#[test]
fn fit_writes_trace_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = config(&format!(
        r#"{{"seed": 5, "mesh": {SQUARE},
            "model": {{"family": "nig", "kappa": 2.0, "mu": 0.5, "gamma": -0.2, "beta": [1.0]}},
            "simulate": {{"n_obs": 80, "relative_noise": 0.2}},
            "gibbs": {{"samples": 20, "burn_in": 5}},
            "mcem": {{"max_iter": 2, "k0": 10, "burn_in": 10}}}}"#
    ));
    cmd_simulate(&cfg, &root.join("sim")).unwrap();
    let model = cmd_fit(&cfg, &root.join("sim/observations.csv"), Transform::None, &root.join("fit")).unwrap();
    let (head, rows) = read_csv(&root.join("fit/trace.csv"));
    assert_eq!(head[..7], ["iteration", "samples", "kappa", "sigma", "sigma_eps", "tau", "nu"]);
    assert!(head.contains(&"q_rb".to_string()) && head.contains(&"beta_0".to_string()));
    assert_eq!(rows.len(), model.iterations);
    assert!(rows.iter().all(|r| r["tau"] == "NaN" && f(r, "nu") > 0.0));
    assert!(Path::new(&model.data).is_absolute());
}

#[test]
fn predict_empty_locations_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = config(&format!(
        r#"{{"seed": 6, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0, "sigma_eps": 0.2, "beta": [0.0]}},
            "simulate": {{"n_obs": 20}}, "gibbs": {{"samples": 10, "burn_in": 2}}, "mcem": {{"max_iter": 0}},
            "predict": {{"lattice": 4}}}}"#
    ));
    cmd_simulate(&cfg, &root.join("sim")).unwrap();
    cmd_fit(&cfg, &root.join("sim/observations.csv"), Transform::None, &root.join("fit")).unwrap();
    let locs = write(root, "empty.csv", "x,y\n");
    let outside = cmd_predict(&root.join("fit/model.json"), Some(&locs), None, &root.join("pred")).unwrap();
    assert!(outside.is_empty());
    assert_eq!(std::fs::read_to_string(root.join("pred/predictions.csv")).unwrap(), "x,y,mean_mc,mean_rb,var_mc,var_rb\n");
    let (head, rows) = read_csv(&root.join("pred/lattice.csv"));
    assert_eq!(head, vec!["x", "y", "mean", "sd"]);
    assert_eq!(rows.len(), 16);
}

#[test]
fn predict_interpolates_with_tiny_noise() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let sim = config(&format!(
        r#"{{"seed": 7, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0, "beta": [1.0]}},
            "simulate": {{"n_obs": 30, "relative_noise": 0.1}}}}"#
    ));
    cmd_simulate(&sim, &root.join("sim")).unwrap();
    let fit = config(&format!(
        r#"{{"seed": 7, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0, "sigma_eps": 1e-5, "beta": [1.0]}},
            "gibbs": {{"samples": 20, "burn_in": 5}}, "mcem": {{"max_iter": 0}}, "predict": {{"lattice": 3}}}}"#
    ));
    let obs = root.join("sim/observations.csv");
    cmd_fit(&fit, &obs, Transform::None, &root.join("fit")).unwrap();
    cmd_predict(&root.join("fit/model.json"), Some(&obs), None, &root.join("pred")).unwrap();
    let (_, want) = read_csv(&obs);
    let (_, got) = read_csv(&root.join("pred/predictions.csv"));
    assert_eq!(want.len(), got.len());
    for (w, g) in want.iter().zip(&got) {
        assert!((f(g, "mean_rb") - f(w, "obs")).abs() < 1e-3, "{} vs {}", f(g, "mean_rb"), f(w, "obs"));
    }
}

#[test]
fn predict_reports_locations_outside_the_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = config(&format!(
        r#"{{"seed": 9, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0, "sigma_eps": 0.2, "beta": [0.0]}},
            "simulate": {{"n_obs": 20}}, "gibbs": {{"samples": 10, "burn_in": 2}}, "mcem": {{"max_iter": 0}},
            "predict": {{"lattice": 2}}}}"#
    ));
    cmd_simulate(&cfg, &root.join("sim")).unwrap();
    cmd_fit(&cfg, &root.join("sim/observations.csv"), Transform::None, &root.join("fit")).unwrap();
    let locs = write(root, "l.csv", "x,y\n1,1\n100,100\n2,2\n");
    let outside = cmd_predict(&root.join("fit/model.json"), Some(&locs), None, &root.join("pred")).unwrap();
    assert_eq!(outside, vec![1]);
    let (_, rows) = read_csv(&root.join("pred/predictions.csv"));
    assert_eq!(rows.len(), 2);
}

#[test]
fn crossval_fold_sizes_and_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = config(&format!(
        r#"{{"seed": 10, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0, "sigma_eps": 0.3, "beta": [0.5]}},
            "simulate": {{"n_obs": 1000}}, "gibbs": {{"samples": 10, "burn_in": 2}}, "crossval": {{"folds": 10}}}}"#
    ));
    cmd_simulate(&cfg, &root.join("sim")).unwrap();
    cmd_crossval(&cfg, &root.join("sim/observations.csv"), Transform::None, &root.join("cv")).unwrap();
    let (head, rows) = read_csv(&root.join("cv/residuals.csv"));
    assert_eq!(head, vec!["index", "fold", "r", "r_s"]);
    let mut sizes = BTreeMap::new();
    for r in &rows {
        *sizes.entry(r["fold"].clone()).or_insert(0) += 1;
    }
    assert_eq!(sizes.len(), 10);
    assert!(sizes.values().all(|&s| s == 100));
    let scores: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(root.join("cv/scores.json")).unwrap()).unwrap();
    let mut keys: Vec<&str> = scores.keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, vec!["crps", "energy", "mean_abs_r", "mean_r", "var_r", "var_rs"]);
}

#[test]
fn sqrt_transform_rejects_negative_observations() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = config(&format!(r#"{{"seed": 1, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 2.0}}}}"#));
    let data = write(root, "d.csv", "x,y,obs\n1,1,4\n2,2,-1\n");
    assert!(matches!(cmd_fit(&cfg, &data, Transform::Sqrt, &root.join("fit")), Err(AppError::Config(_))));
}

#[test]
fn sqrt_transform_back_transforms_moments() {
    assert_eq!(Transform::Sqrt.back(2.0, 0.5), (4.5, 2.0 * 0.25 + 4.0 * 4.0 * 0.5));
    assert_eq!(Transform::None.back(2.0, 0.5), (2.0, 0.5));
}

#[test]
fn input_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let missing = root.join("nope.json");
    let out = cli(&["simulate", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad_key = write(root, "c.json", &format!(r#"{{"seed": 1, "mesh": {SQUARE}, "model": {{"family": "gal", "kappa": 1.0, "typo": 3}}}}"#));
    assert_eq!(cli(&["simulate", "--config", bad_key.to_str().unwrap()]).status.code(), Some(2));

    let no_seed = write(root, "s.json", &format!(r#"{{"mesh": {SQUARE}, "model": {{"family": "gal", "kappa": 1.0}}}}"#));
    assert_eq!(cli(&["simulate", "--config", no_seed.to_str().unwrap()]).status.code(), Some(2));

    let good = write(root, "g.json", &format!(r#"{{"seed": 1, "mesh": {SQUARE}, "model": {{"family": "gaussian", "kappa": 1.0}}}}"#));
    let no_obs = write(root, "d.csv", "x,y\n1,1\n");
    let out = cli(&["fit", "--config", good.to_str().unwrap(), "--data", no_obs.to_str().unwrap(), "--out", root.join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing column 'obs'"));
}

#[test]
fn seed_flag_overrides_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write(root, "c.json", &format!(r#"{{"seed": 1, "mesh": {SQUARE}, "model": {{"family": "gal", "kappa": 2.0}}}}"#));
    let c = cfg.to_str().unwrap();
    let run = |seed: &str, out: &str| {
        let dir = root.join(out);
        assert!(cli(&["simulate", "--config", c, "--seed", seed, "--out", dir.to_str().unwrap()]).status.success());
        std::fs::read(dir.join("field.csv")).unwrap()
    };
    assert_eq!(run("11", "a"), run("11", "b"));
    assert_ne!(run("11", "a"), run("12", "c"));
}
