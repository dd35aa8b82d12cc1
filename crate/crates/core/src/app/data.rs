use std::path::Path;

use crate::dense::Matrix;
use crate::model::Dataset;

use super::AppError;

/// Rows of a dataset CSV. Rows without an observation are kept as
/// prediction-only locations.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub locations: Vec<[f64; 2]>,
    pub obs: Vec<Option<f64>>,
    /// Intercept column followed by the named covariates, one row per CSV row.
    pub design: Matrix<f64>,
}

fn is_missing(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

/// Reads columns `x[,y]`, `obs` (required when `need_obs`) and the named
/// covariates.
pub fn load_dataset(path: &Path, dim: usize, covariates: &[String], need_obs: bool) -> Result<LoadedData, AppError> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let malformed = |line: u64, message: String| AppError::MalformedCsv { path: path.display().to_string(), line, message };
    let headers = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::MissingColumn { path: path.display().to_string(), column: name.to_string() })
    };
    let xi = column("x")?;
    let yi = if dim == 2 { Some(column("y")?) } else { None };
    let oi = if need_obs { Some(column("obs")?) } else { column("obs").ok() };
    let ci = covariates.iter().map(|c| column(c)).collect::<Result<Vec<_>, _>>()?;

    let mut locations = Vec::new();
    let mut obs = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let number = |k: usize, what: &str| -> Result<f64, AppError> {
            let s = rec.get(k).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(line, format!("{what}: cannot parse '{s}'")))
        };
        let x = number(xi, "x")?;
        let y = match yi {
            Some(k) => number(k, "y")?,
            None => 0.0,
        };
        locations.push([x, y]);
        obs.push(match oi {
            Some(k) if !is_missing(rec.get(k).unwrap_or("")) => Some(number(k, "obs")?),
            _ => None,
        });
        let mut row = vec![1.0];
        for (&k, name) in ci.iter().zip(covariates) {
            row.push(number(k, name)?);
        }
        rows.push(row);
    }
    let design = if rows.is_empty() { Matrix::zeros(0, covariates.len() + 1) } else { Matrix::from_rows(&rows).expect("rows share a width") };
    Ok(LoadedData { locations, obs, design })
}

impl LoadedData {
    pub fn observed(&self) -> Vec<usize> {
        (0..self.obs.len()).filter(|&i| self.obs[i].is_some()).collect()
    }

    pub fn unobserved(&self) -> Vec<usize> {
        (0..self.obs.len()).filter(|&i| self.obs[i].is_none()).collect()
    }

    /// Observed rows as a model dataset with all-ones node covariates.
    pub fn dataset(&self, n_nodes: usize) -> Dataset<f64> {
        let idx = self.observed();
        Dataset {
            locations: idx.iter().map(|&i| self.locations[i]).collect(),
            y: idx.iter().map(|&i| self.obs[i].expect("observed row")).collect(),
            b: self.design.select_rows(&idx),
            b_gamma: Matrix::ones(n_nodes),
            b_mu: Matrix::ones(n_nodes),
        }
    }
}
