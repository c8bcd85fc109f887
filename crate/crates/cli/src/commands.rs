//! The five subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde_json::{json, Value};
use sinhpoisson::bubbles::Configuration;
use sinhpoisson::io::{
    fmt_f64, read_profile, summary_csv, to_json, write_profile, OptimizeRecord, ReportRecord,
};
use sinhpoisson::kernel::assemble_inverse;
use sinhpoisson::pipeline::{analyze_step, format_signs, limit_configuration, parse_signs, run_sweep};
use sinhpoisson::reduced::{boundary_blowdown_probe, conjecture_probe};
use sinhpoisson::solver::{residual, solve_at, ContinuationOptions, NewtonOptions};
use sinhpoisson::verify::{count_nodal_regions, peak_diagnostics, profile_convergence, default_epsilon};
use sinhpoisson::Error;

use crate::config::{Command, RunConfig, MANIFEST_NAME};
use crate::CliError;

/// Default sweep range when none is given.
pub const DEFAULT_RANGE: (f64, f64) = (0.2, 0.0125);
/// Margins used by the boundary probe.
pub const BLOWDOWN_MARGINS: [f64; 6] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4];

/// Runs the configured command. Returns the paths written, relative to the
/// output directory.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(&cfg.out)?;
    let mut written = Vec::new();
    write(&cfg.out, MANIFEST_NAME, &cfg.manifest(), &mut written)?;
    match cfg.command {
        Command::Optimize => optimize(cfg, &mut written)?,
        Command::Solve => solve(cfg, &mut written)?,
        Command::Sweep => sweep(cfg, &mut written)?,
        Command::Verify => verify(cfg, &mut written)?,
        Command::Probe => probe(cfg, &mut written)?,
    }
    Ok(written)
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<String>) -> Result<(), CliError> {
    fs::write(dir.join(name), contents)?;
    written.push(name.to_string());
    Ok(())
}

fn options(cfg: &RunConfig) -> ContinuationOptions {
    ContinuationOptions {
        base_n: cfg.base_n,
        newton: NewtonOptions { tol: cfg.tol, ..Default::default() },
        ..Default::default()
    }
}

/// Explicit points if given, otherwise the reduced-energy maximizer.
fn configuration(cfg: &RunConfig) -> Result<Configuration, CliError> {
    match &cfg.xi {
        Some(xi) => Ok(Configuration::new(xi.clone(), cfg.signs.clone())?),
        None => match limit_configuration(cfg.k, &cfg.signs, cfg.seed) {
            Ok(r) => Ok(r.config),
            Err(Error::NoCriticalPoint) => Err(CliError::Config(format!(
                "no critical point of the reduced energy for signs {}; pass xi explicitly",
                format_signs(&cfg.signs)
            ))),
            Err(e) => Err(e.into()),
        },
    }
}

fn optimize(cfg: &RunConfig, written: &mut Vec<String>) -> Result<(), CliError> {
    let record = match limit_configuration(cfg.k, &cfg.signs, cfg.seed) {
        Ok(r) => OptimizeRecord::found(&r),
        Err(Error::NoCriticalPoint) => OptimizeRecord::none_found(cfg.k, &cfg.signs),
        Err(e) => return Err(e.into()),
    };
    let text = to_json(&record)?;
    print!("{text}");
    write(&cfg.out, "optimize.json", &text, written)
}

fn profile_text(u: &sinhpoisson::mesh::GridFunction) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_profile(&mut buf, u)?;
    Ok(String::from_utf8(buf).expect("ascii"))
}

fn solve(cfg: &RunConfig, written: &mut Vec<String>) -> Result<(), CliError> {
    let lambda = cfg
        .lambda
        .ok_or_else(|| CliError::Config("solve needs lambda".into()))?;
    let c = configuration(cfg)?;
    let step = solve_at(&c, lambda, None, None, options(cfg))?;
    let a = analyze_step(&step, &c, cfg.sigma)?;
    write(&cfg.out, "profile.csv", &profile_text(&step.report.solution)?, written)?;
    let report = ReportRecord::from_analysis(&a, c.xis(), c.signs());
    write(&cfg.out, "report.json", &to_json(&report)?, written)?;
    eprintln!(
        "lambda {} residual {:e} nodal count {:?}",
        lambda, a.residual_sup, report.nodal_count
    );
    Ok(())
}

fn sweep(cfg: &RunConfig, written: &mut Vec<String>) -> Result<(), CliError> {
    let (start, end) = cfg.lambda_range.unwrap_or(DEFAULT_RANGE);
    let c = configuration(cfg)?;
    let sweep = run_sweep(&c, start, end, cfg.factor, options(cfg), cfg.sigma)?;
    for (i, (step, a)) in sweep.outcome.steps.iter().zip(&sweep.analyses).enumerate() {
        write(&cfg.out, &format!("profile_{i:02}.csv"), &profile_text(&step.report.solution)?, written)?;
        let report = ReportRecord::from_analysis(a, c.xis(), c.signs());
        write(&cfg.out, &format!("report_{i:02}.json"), &to_json(&report)?, written)?;
        eprintln!(
            "lambda {} residual {:e} nodal count {:?}",
            a.lambda,
            a.residual_sup,
            a.nodal_count()
        );
    }
    write(&cfg.out, "summary.csv", &summary_csv(c.k(), &sweep.analyses), written)?;
    if let Some((lambda, e)) = &sweep.outcome.failure {
        return Err(CliError::NonConvergence(format!("at lambda = {lambda}: {e}")));
    }
    let bad: Vec<f64> = sweep
        .analyses
        .iter()
        .filter(|a| a.nodal_count() != Some(c.k()))
        .map(|a| a.lambda)
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Verification(format!(
            "nodal count differs from k = {} at lambda {bad:?}",
            c.k()
        )));
    }
    Ok(())
}

fn check(name: &str, pass: bool, detail: Value) -> Value {
    json!({ "name": name, "pass": pass, "detail": detail })
}

fn verify(cfg: &RunConfig, written: &mut Vec<String>) -> Result<(), CliError> {
    let profile_path = cfg
        .profile
        .as_ref()
        .ok_or_else(|| CliError::Config("verify needs profile".into()))?;
    let report_path = cfg
        .report
        .as_ref()
        .ok_or_else(|| CliError::Config("verify needs report".into()))?;
    let u = read_profile(BufReader::new(fs::File::open(profile_path)?))?;
    let report_text = fs::read_to_string(report_path)?;
    let original: Value = serde_json::from_str(&report_text)?;
    let lambda = original
        .get("lambda")
        .and_then(Value::as_f64)
        .ok_or_else(|| CliError::Config("report has no lambda".into()))?;

    // signs from the report, else from the signed peak heights
    let heights: Vec<f64> = original
        .get("peaks")
        .and_then(Value::as_array)
        .map(|ps| ps.iter().filter_map(|p| p.get("height").and_then(Value::as_f64)).collect())
        .unwrap_or_default();
    let signs = match original.get("signs").and_then(Value::as_str) {
        Some(s) => parse_signs(s, s.len())?,
        None => heights.iter().map(|&h| if h >= 0.0 { 1 } else { -1 }).collect(),
    };
    let k = signs.len();
    let xi_limit: Option<Vec<f64>> = original
        .get("xi_limit")
        .and_then(Value::as_array)
        .map(|a| a.iter().filter_map(Value::as_f64).collect());
    let c = match xi_limit {
        Some(xi) if xi.len() == k => Configuration::new(xi, signs.clone())?,
        _ => configuration(&RunConfig { k, signs: signs.clone(), xi: None, ..cfg.clone() })?,
    };

    let mut checks = Vec::new();
    let op = assemble_inverse(u.mesh().clone())?;
    let res = residual(&op, &u, lambda)?.sup_norm();
    let res_tol = (10.0 * cfg.tol).max(1e-9);
    checks.push(check("residual", res <= res_tol, json!({ "measured": res, "tolerance": res_tol })));

    let nodal = count_nodal_regions(&u, &c, lambda);
    let measured_count = nodal.as_ref().ok().map(|n| n.nodal_count);
    checks.push(check(
        "nodal_count",
        measured_count == Some(k),
        match &nodal {
            Ok(n) => json!({ "expected": k, "measured": n.nodal_count, "method": n.method, "zeros": n.zero_locations }),
            Err(e) => json!({ "expected": k, "error": e.to_string() }),
        },
    ));
    let reported_count = original.get("nodal_count").and_then(Value::as_u64).map(|n| n as usize);
    if reported_count.is_some() {
        checks.push(check(
            "reported_nodal_count",
            reported_count == measured_count,
            json!({ "reported": reported_count, "measured": measured_count }),
        ));
    }

    let peaks = peak_diagnostics(&u, &c, lambda);
    let alternating = heights.windows(2).all(|w| w[0] * w[1] < 0.0);
    checks.push(check("peak_signs_alternate", alternating, json!({ "heights": heights })));
    let peak_detail = match &peaks {
        Ok(p) => {
            let rows: Vec<Value> = p
                .peaks
                .iter()
                .map(|q| {
                    json!({
                        "xi": q.location,
                        "height": q.sign as f64 * q.height,
                        "mass": q.local_mass,
                        "mass_error": q.mass_error,
                        "predicted_height": q.predicted_height,
                        "height_gap": q.height_gap,
                    })
                })
                .collect();
            let reported: Vec<(f64, f64)> = original
                .get("peaks")
                .and_then(Value::as_array)
                .map(|ps| {
                    ps.iter()
                        .filter_map(|p| Some((p.get("xi")?.as_f64()?, p.get("mass")?.as_f64()?)))
                        .collect()
                })
                .unwrap_or_default();
            let consistent = reported.len() == p.peaks.len()
                && reported
                    .iter()
                    .zip(&p.peaks)
                    .all(|(r, q)| (r.0 - q.location).abs() <= 1e-8 && (r.1 - q.local_mass).abs() <= 1e-8);
            checks.push(check("reported_peaks", consistent, json!({ "reported": reported.len() })));
            Value::Array(rows)
        }
        Err(e) => {
            checks.push(check("reported_peaks", false, json!({ "error": e.to_string() })));
            Value::Null
        }
    };
    let profile = profile_convergence(&u, &c, lambda, default_epsilon(&c)).ok();

    let all_pass = checks.iter().all(|c| c["pass"].as_bool() == Some(true));
    let mut out = original.clone();
    if let Value::Object(map) = &mut out {
        map.insert(
            "verification".into(),
            json!({
                "pass": all_pass,
                "checks": checks,
                "measured": {
                    "residual_sup": res,
                    "mesh_nodes": u.values().len(),
                    "xi_limit": c.xis(),
                    "peaks": peak_detail,
                    "profile_sup": profile.map(|p| p.sup),
                    "profile_weighted_sup": profile.map(|p| p.weighted_sup),
                },
            }),
        );
    } else {
        return Err(CliError::Config("report is not a JSON object".into()));
    }
    write(&cfg.out, "verified.json", &to_json(&out)?, written)?;
    if !all_pass {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| c["pass"].as_bool() != Some(true))
            .filter_map(|c| c["name"].as_str())
            .collect();
        return Err(CliError::Verification(failed.join(", ")));
    }
    Ok(())
}

fn probe(cfg: &RunConfig, written: &mut Vec<String>) -> Result<(), CliError> {
    let summary = conjecture_probe(cfg.k, &cfg.signs, cfg.starts, cfg.seed)?;
    let mut table = String::from("cluster,value,classification,hits");
    for i in 1..=cfg.k {
        let _ = write!(table, ",xi_{i}");
    }
    table.push('\n');
    for (n, c) in summary.clusters.iter().enumerate() {
        let _ = write!(table, "{n},{},{},{}", fmt_f64(c.value), c.classification.as_str(), c.hits);
        for x in &c.xi {
            let _ = write!(table, ",{}", fmt_f64(*x));
        }
        table.push('\n');
    }
    write(&cfg.out, "conjecture.csv", &table, written)?;

    let rows = boundary_blowdown_probe(cfg.k, &cfg.signs, &BLOWDOWN_MARGINS)?;
    let mut blow = String::from("approach,distance,value\n");
    for r in &rows {
        let approach = match r.approach {
            sinhpoisson::reduced::Approach::Endpoint => "endpoint",
            sinhpoisson::reduced::Approach::Neighbor => "neighbor",
        };
        let _ = writeln!(blow, "{approach},{},{}", fmt_f64(r.distance), fmt_f64(r.value));
    }
    write(&cfg.out, "blowdown.csv", &blow, written)?;

    let info = json!({
        "k": summary.k,
        "signs": format_signs(&summary.signs),
        "n_starts": summary.n_starts,
        "seed": summary.seed,
        "distinct_critical_points": summary.distinct(),
        "diverged": summary.diverged,
        "inconclusive": summary.inconclusive,
        "authoritative": summary.authoritative,
    });
    write(&cfg.out, "probe.json", &to_json(&info)?, written)?;
    eprintln!(
        "{} distinct critical points, {} diverged, {} inconclusive (evidence only)",
        summary.distinct(),
        summary.diverged,
        summary.inconclusive
    );
    Ok(())
}
