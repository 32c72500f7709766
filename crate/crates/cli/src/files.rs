//! On-disk formats: the CSV data set, its JSON sidecar and the JSON report.

use std::fs;
use std::path::{Path, PathBuf};

use emfg::state_space::ModelKind;
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

pub const SCHEMA: u32 = 1;

/// Model parameters and ground truth stored next to a simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: u32,
    pub model: ModelKind,
    pub order: usize,
    pub length: usize,
    pub sigma_u2: f64,
    pub sigma_z2: f64,
    pub theta_true: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub model: ModelKind,
    pub order: usize,
    pub length: usize,
    pub sigma_u2: f64,
    pub sigma_z2: f64,
    pub schedule: &'static str,
    pub theta_hat: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
    /// `null` where the log-likelihood is undefined.
    pub log_liks: Vec<Option<f64>>,
    pub converged: bool,
    pub iterations_used: usize,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// `data.csv` → `data.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn write_csv(path: &Path, y: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))?;
    let io = |e| CliError::io(path, e);
    w.write_record(["k", "y"]).map_err(io)?;
    for (k, v) in y.iter().enumerate() {
        // 17 significant digits round-trip every f64 exactly.
        w.write_record([(k + 1).to_string(), format!("{v:.16e}")])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads `k,y` rows. `k` must run 1, 2, … in order.
pub fn read_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = r.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["k", "y"] {
        return Err(parse_err(path, 1, "header must be `k,y`".into()));
    }
    let mut y = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(
                path,
                line,
                format!("expected 2 fields, got {}", rec.len()),
            ));
        }
        let k: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad index `{}`", &rec[0])))?;
        if k != y.len() + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected k = {}, got {k}", y.len() + 1),
            ));
        }
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_err(path, line, format!("bad value `{}`", &rec[1])))?;
        if !v.is_finite() {
            return Err(parse_err(
                path,
                line,
                format!("non-finite value `{}`", &rec[1]),
            ));
        }
        y.push(v);
    }
    if y.is_empty() {
        return Err(parse_err(path, 1, "no observations".into()));
    }
    Ok(y)
}

fn parse_err(path: &Path, line: u64, msg: String) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let s: Sidecar =
        serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
    if s.schema != SCHEMA {
        return Err(parse_err(
            path,
            1,
            format!("unsupported schema {}", s.schema),
        ));
    }
    Ok(s)
}
