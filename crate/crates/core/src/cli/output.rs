//! CSV and JSON serialization of trajectories and reports.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::Trajectory;

/// Trajectory CSV columns, in file order.
pub const TRAJECTORY_COLUMNS: [&str; 9] =
    ["t", "f", "penalty", "lagrangian", "theta", "norm_w", "gap_wu", "grad_norm", "nnz_u"];

/// 17 significant digits: exact round-trip for f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

pub fn trajectory_csv(traj: &Trajectory) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRAJECTORY_COLUMNS).map_err(csv_err)?;
    for r in &traj.records {
        w.write_record([
            r.t.to_string(),
            fmt_float(r.loss),
            fmt_float(r.penalty),
            fmt_float(r.lagrangian),
            fmt_float(r.theta),
            fmt_float(r.norm_w),
            fmt_float(r.gap_wu),
            fmt_float(r.grad_norm),
            r.nnz_u.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidConfig(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes every `(name, contents)` pair under `dir`, creating it if needed.
pub fn write_all(dir: &Path, files: &[(&str, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.0] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }
}
