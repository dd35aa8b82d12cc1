use std::path::Path;

use serde::Serialize;

use super::AppError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<(), AppError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let io = |e: csv::Error| AppError::Io { path: path.display().to_string(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), AppError> {
    std::fs::write(path, to_json(value)).map_err(|e| AppError::io(path, e))
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
