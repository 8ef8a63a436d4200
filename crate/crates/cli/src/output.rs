//! CSV and text artifact writers. Floats use 17 significant digits so every
//! value round-trips exactly.

use std::fs;
use std::path::{Path, PathBuf};

use passnet_core::sim::SimulationResult;

use crate::commands::CliError;
use crate::report::AgentIndexRow;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| output_error(&path, e))?;
    Ok(path)
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| output_error(&path, e))?;
    w.write_record(header).map_err(|e| output_error(&path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| output_error(&path, e))?;
    }
    w.flush().map_err(|e| output_error(&path, e))?;
    Ok(path)
}

pub fn trajectory_header(n: usize, p: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["y", "u", "w"] {
        h.extend((1..=n).map(|i| format!("{prefix}_{i}")));
    }
    h.extend((1..=p).map(|k| format!("dY_{k}")));
    h
}

pub const METRICS_HEADER: [&str; 5] = ["T", "norm_DY", "norm_DW", "norm_V", "rho_hat"];
pub const INDICES_HEADER: [&str; 5] = ["agent", "nu", "argmin_omega", "declared_nu", "discrepancy"];

pub fn write_trajectory_csv(
    dir: &Path,
    n: usize,
    p: usize,
    res: &SimulationResult,
) -> Result<PathBuf, CliError> {
    let rows = res.samples.iter().map(|s| {
        std::iter::once(s.t)
            .chain(s.y.iter().copied())
            .chain(s.u.iter().copied())
            .chain(s.w.iter().copied())
            .chain(s.dy.iter().copied())
            .map(fmt_f64)
            .collect()
    });
    write_csv(dir, "trajectory.csv", &trajectory_header(n, p), rows)
}

/// Running norms per recorded instant; `rho_hat` is empty while `||D^T W||_T = 0`.
pub fn write_metrics_csv(dir: &Path, res: &SimulationResult) -> Result<PathBuf, CliError> {
    let header: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = res.samples.iter().map(|s| {
        let rho = if s.norm_dw > 0.0 {
            fmt_f64(s.norm_dy / s.norm_dw)
        } else {
            String::new()
        };
        vec![
            fmt_f64(s.t),
            fmt_f64(s.norm_dy),
            fmt_f64(s.norm_dw),
            fmt_f64(s.norm_v),
            rho,
        ]
    });
    write_csv(dir, "metrics.csv", &header, rows)
}

pub fn write_indices_csv(dir: &Path, rows: &[AgentIndexRow]) -> Result<PathBuf, CliError> {
    let header: Vec<String> = INDICES_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = rows.iter().map(|r| {
        vec![
            r.agent.to_string(),
            r.computed.map_or_else(String::new, |c| fmt_f64(c.nu)),
            r.computed.map_or_else(String::new, |c| fmt_f64(c.argmin_omega)),
            r.declared.map_or_else(String::new, fmt_f64),
            r.discrepancy.to_string(),
        ]
    });
    write_csv(dir, "indices.csv", &header, rows)
}
