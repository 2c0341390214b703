//! Run outputs: `trajectory.csv`, `meta.json` and optional `fields_t*.csv`.
//!
//! Numbers are written in Rust's shortest round-trip form, so the same
//! record always gives the same bytes and parsing restores every bit.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cli::config::{FieldGrid, ScenarioConfig};
use crate::dynamics::{flow, Sample, TrajectoryRecord};
use crate::fields::{LPState, VelocityField};
use crate::{Error, Result};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const META_FILE: &str = "meta.json";

pub fn number(v: f64) -> String {
    format!("{v:?}")
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}: {e}", path.display()))
}

/// Column names: `t`, coordinates, their rates (`<name>_dot`), `x_i`/`y_i`
/// per vortex (from 1), then the scalar diagnostics.
pub fn trajectory_header(coordinate_names: &[String], n_vortices: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(coordinate_names.iter().cloned());
    h.extend(coordinate_names.iter().map(|n| format!("{n}_dot")));
    for i in 1..=n_vortices {
        h.push(format!("x_{i}"));
        h.push(format!("y_{i}"));
    }
    for c in ["energy", "circulation", "boundary_circulation", "bc_residual", "force_discrepancy"] {
        h.push(c.to_string());
    }
    h
}

pub fn trajectory_row(s: &Sample) -> Vec<String> {
    let mut r = vec![number(s.t)];
    r.extend(s.q.iter().chain(&s.qdot).map(|&v| number(v)));
    for p in &s.positions {
        r.push(number(p.x));
        r.push(number(p.y));
    }
    for v in [s.energy, s.circulation, s.boundary_circulation, s.bc_residual, s.force_discrepancy] {
        r.push(number(v));
    }
    r
}

pub fn trajectory_csv(record: &TrajectoryRecord, n_vortices: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record(trajectory_header(&record.coordinate_names, n_vortices)).map_err(fail)?;
    for s in &record.samples {
        w.write_record(trajectory_row(s)).map_err(fail)?;
    }
    w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))
}

pub fn write_trajectory(dir: &Path, record: &TrajectoryRecord, n_vortices: usize) -> Result<PathBuf> {
    let path = dir.join(TRAJECTORY_FILE);
    fs::write(&path, trajectory_csv(record, n_vortices)?).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// How a run ended, for `meta.json`.
pub struct RunSummary<'a> {
    pub config: &'a ScenarioConfig,
    pub wall_time: f64,
    pub rows: usize,
    pub error: Option<(&'a Error, f64)>,
}

pub fn write_meta(dir: &Path, s: &RunSummary<'_>) -> Result<PathBuf> {
    let path = dir.join(META_FILE);
    let mut meta = serde_json::json!({
        "config": s.config,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": s.wall_time,
        "rows": s.rows,
        "status": if s.error.is_some() { "aborted" } else { "completed" },
    });
    if let Some((e, t)) = s.error {
        meta["error"] = serde_json::json!({ "message": e.to_string(), "time": t });
    }
    let text = serde_json::to_string_pretty(&meta).map_err(|e| io(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
    Ok(path)
}

pub fn fields_file(t: f64) -> String {
    format!("fields_t{t:.6}.csv")
}

/// Velocity on the grid, row-major in `y` then `x`; `NaN` inside the body.
pub fn write_fields(dir: &Path, grid: &FieldGrid, state: &LPState, n_panels: usize) -> Result<PathBuf> {
    let f = flow(state, n_panels)?;
    let path = dir.join(fields_file(state.time));
    let mut out = String::from("x,y,u,v\n");
    let coord = |r: [f64; 2], n: usize, k: usize| if n == 1 { r[0] } else { r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64 };
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = crate::Vec2::new(coord(grid.x, grid.nx, i), coord(grid.y, grid.ny, j));
            let inside = f.placement.as_ref().is_some_and(|pl| pl.boundary.contains(p));
            let u = if inside { crate::Vec2::new(f64::NAN, f64::NAN) } else { f.velocity(p) };
            out.push_str(&[number(p.x), number(p.y), number(u.x), number(u.y)].join(","));
            out.push('\n');
        }
    }
    let mut file = fs::File::create(&path).map_err(|e| io(&path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| io(&path, e))?;
    Ok(path)
}
