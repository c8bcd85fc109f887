//! Profile CSVs and JSON records.
//!
//! Floats are written with Rust's shortest round-trip exponent formatting, so
//! reading a file back reproduces the values bit for bit and re-runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::pipeline::{format_signs, StepAnalysis};
use crate::reduced::EnergyReport;

pub const PROFILE_HEADER: &str = "x,u";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_profile<W: Write>(mut w: W, u: &GridFunction) -> Result<()> {
    let mut s = String::with_capacity(48 * u.values().len());
    s.push_str(PROFILE_HEADER);
    s.push('\n');
    for (x, v) in u.mesh().nodes().iter().zip(u.values()) {
        let _ = writeln!(s, "{},{}", fmt_f64(*x), fmt_f64(*v));
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads an `x,u` profile; the nodes become an unpatched mesh.
pub fn read_profile<R: BufRead>(r: R) -> Result<GridFunction> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty profile".into()))??;
    if header.trim() != PROFILE_HEADER {
        return Err(Error::Parse(format!("expected header {PROFILE_HEADER:?}, got {header:?}")));
    }
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", n + 2)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 2)))
        };
        xs.push(parse(a)?);
        us.push(parse(b)?);
    }
    let mesh = Arc::new(Mesh::from_nodes(xs)?);
    GridFunction::new(mesh, us)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub xi: f64,
    /// Signed value of `u` at the extremum.
    pub height: f64,
    pub mass: f64,
}

/// Per-solve report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub lambda: f64,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub nodal_count: Option<usize>,
    pub peaks: Vec<PeakRecord>,
    pub energy: f64,
    pub sigma_perp: Option<f64>,
    pub k: usize,
    pub signs: String,
    /// Limiting points the run was built on.
    pub xi_limit: Vec<f64>,
    /// Points located by the orthogonal decomposition.
    pub xi_located: Vec<f64>,
    pub mesh_nodes: usize,
    pub remainder_sup: Option<f64>,
    pub sigma_full: Option<f64>,
    pub nodal_error: Option<String>,
}

impl ReportRecord {
    pub fn from_analysis(a: &StepAnalysis, xi_limit: &[f64], signs: &[i8]) -> Self {
        let peaks = match &a.peaks {
            Ok(p) => p
                .peaks
                .iter()
                .map(|p| PeakRecord { xi: p.location, height: p.sign as f64 * p.height, mass: p.local_mass })
                .collect(),
            Err(_) => Vec::new(),
        };
        Self {
            lambda: a.lambda,
            residual_sup: a.residual_sup,
            newton_iters: a.newton_iters,
            nodal_count: a.nodal_count(),
            peaks,
            energy: a.energy,
            sigma_perp: a.sigma_perp,
            k: xi_limit.len(),
            signs: format_signs(signs),
            xi_limit: xi_limit.to_vec(),
            xi_located: a.points.clone(),
            mesh_nodes: a.mesh_nodes,
            remainder_sup: a.remainder_sup,
            sigma_full: a.sigma_full,
            nodal_error: a.nodal.as_ref().err().cloned(),
        }
    }
}

/// Result of a reduced-energy maximization; `classification` is
/// `"none found"` when every start ran into the boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRecord {
    pub k: usize,
    pub signs: String,
    pub xi: Option<Vec<f64>>,
    pub value: Option<f64>,
    pub grad_norm: Option<f64>,
    pub hessian_eigs: Option<Vec<f64>>,
    pub classification: String,
}

pub const NONE_FOUND: &str = "none found";

impl OptimizeRecord {
    pub fn found(r: &EnergyReport) -> Self {
        Self {
            k: r.config.k(),
            signs: format_signs(r.config.signs()),
            xi: Some(r.config.xis().to_vec()),
            value: Some(r.value),
            grad_norm: Some(r.grad_norm),
            hessian_eigs: Some(r.hessian_eigs.clone()),
            classification: r.classification.as_str().to_string(),
        }
    }

    pub fn none_found(k: usize, signs: &[i8]) -> Self {
        Self {
            k,
            signs: format_signs(signs),
            xi: None,
            value: None,
            grad_norm: None,
            hessian_eigs: None,
            classification: NONE_FOUND.to_string(),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Sweep summary table with one row per analysed step and per-peak column
/// groups for `k` peaks.
pub fn summary_csv(k: usize, rows: &[StepAnalysis]) -> String {
    let mut cols: Vec<String> = vec!["lambda".into(), "residual_sup".into(), "newton_iters".into(), "nodal_count".into()];
    for field in ["xi", "height", "mass", "mass_error", "height_gap"] {
        cols.extend((1..=k).map(|i| format!("{field}_{i}")));
    }
    cols.extend(
        ["remainder_sup", "energy", "norm_gap", "energy_gap", "profile_sup", "sigma_perp"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut out = cols.join(",");
    out.push('\n');
    for a in rows {
        let mut cells = vec![
            fmt_f64(a.lambda),
            fmt_f64(a.residual_sup),
            a.newton_iters.to_string(),
            a.nodal_count().map(|n| n.to_string()).unwrap_or_default(),
        ];
        let peaks = a.peaks.as_ref().ok().map(|p| p.peaks.as_slice()).unwrap_or(&[]);
        let get = |f: &dyn Fn(&crate::verify::Peak) -> f64| -> Vec<String> {
            (0..k).map(|i| peaks.get(i).map(|p| fmt_f64(f(p))).unwrap_or_default()).collect()
        };
        cells.extend(get(&|p| p.location));
        cells.extend(get(&|p| p.sign as f64 * p.height));
        cells.extend(get(&|p| p.local_mass));
        cells.extend(get(&|p| p.mass_error));
        cells.extend(get(&|p| p.height_gap));
        cells.push(fmt_opt(a.remainder_sup));
        cells.push(fmt_f64(a.energy));
        cells.push(fmt_f64(a.ansatz.norm_gap()));
        cells.push(fmt_f64(a.ansatz.energy_gap()));
        cells.push(fmt_opt(a.profile.map(|p| p.sup)));
        cells.push(fmt_opt(a.sigma_perp));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
