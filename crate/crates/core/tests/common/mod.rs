//! Property checks shared by the `properties` and `acceptance` targets. Each
//! check runs a deterministic proptest runner for the given number of cases.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use sinhpoisson::bubbles::{alternating_signs, Configuration};
use sinhpoisson::green::{green, green_dx, robin, robin_dxi};
use sinhpoisson::kernel::{assemble_inverse, KernelOperator};
use sinhpoisson::mesh::{GridFunction, Mesh};
use sinhpoisson::reduced::{interaction_sum, reduced_grad, reduced_value};
use sinhpoisson::solver::residual;
use sinhpoisson::verify::limit_profile_monotonicity;

pub type Check = fn(u32) -> Result<(), String>;

/// Named property suites with their case counts.
pub const SUITES: &[(&str, Check, u32)] = &[
    ("green reciprocity", green_reciprocity, 10_000),
    ("green positivity", green_positivity, 10_000),
    ("robin consistency", robin_consistency, 1_000),
    ("derivatives vs finite differences", derivative_fd, 1_000),
    ("green decreasing away from the pole", green_monotone, 1_000),
    ("alternating interaction nonpositive", interaction_nonpositive, 10_000),
    ("reduced gradient vs finite differences", reduced_gradient_fd, 1_000),
    ("reduced value reflection symmetry", reflection_symmetry, 1_000),
    ("limit profile monotone positivity", monotone_positivity, 1_000),
    ("sign-flip symmetry of the residual", sign_flip_residual, 1_000),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn report<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn point() -> impl Strategy<Value = f64> {
    -0.999f64..0.999
}

/// Ordered configuration of `k` points: `k + 1` gaps of relative size in
/// `[0.02, 1]` rescaled to sum to 2.
pub fn ordered(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, k + 1).prop_map(move |g| {
        let total: f64 = g.iter().sum();
        let mut x = -1.0;
        g[..k]
            .iter()
            .map(|gi| {
                x += 2.0 * gi / total;
                x
            })
            .collect()
    })
}

fn ordered_any(kmin: usize, kmax: usize) -> impl Strategy<Value = Vec<f64>> {
    (kmin..=kmax).prop_flat_map(ordered)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

pub fn green_reciprocity(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(point(), point()), |(a, b)| {
        prop_assume!((a - b).abs() > 1e-9);
        let d = (green(a, b).unwrap() - green(b, a).unwrap()).abs();
        ensure(d <= 1e-14, || format!("G({a}, {b}) asymmetric by {d:e}"))
    }))
}

pub fn green_positivity(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(point(), point()), |(a, b)| {
        prop_assume!(a != b);
        let g = green(a, b).unwrap();
        ensure(g > 0.0, || format!("G({a}, {b}) = {g}"))
    }))
}

pub fn robin_consistency(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&(point(), point()), |(a, b)| {
        prop_assume!((a - b).abs() >= 1e-6);
        let d = green(a, b).unwrap() - robin(a, b).unwrap() - (1.0 / (b - a).abs()).ln() / PI;
        ensure(d.abs() <= 1e-12, || format!("G - H - log at ({a}, {b}) is {d:e}"))
    }))
}

pub fn derivative_fd(cases: u32) -> Result<(), String> {
    let h = 1e-6;
    let pts = (-0.99f64..0.99, -0.99f64..0.99);
    report(runner(cases).run(&pts, |(xi, x)| {
        prop_assume!((x - xi).abs() >= 1e-2);
        let gd = green_dx(xi, x).unwrap();
        let gfd = (green(xi, x + h).unwrap() - green(xi, x - h).unwrap()) / (2.0 * h);
        // absolute floor at the rounding level eps |G| / h of the difference
        ensure((gd - gfd).abs() <= 1e-6 * gd.abs() + 1e-9, || format!("green_dx({xi}, {x}) {gd} vs {gfd}"))?;
        let rd = robin_dxi(xi, x).unwrap();
        let rfd = (robin(xi + h, x).unwrap() - robin(xi - h, x).unwrap()) / (2.0 * h);
        ensure((rd - rfd).abs() <= 1e-6 * rd.abs() + 1e-9, || format!("robin_dxi({xi}, {x}) {rd} vs {rfd}"))
    }))
}

pub fn green_monotone(cases: u32) -> Result<(), String> {
    let triple = ordered(3);
    report(runner(cases).run(&triple, |p| {
        let (x, y, z) = (p[0], p[1], p[2]);
        let d = green(x, z).unwrap() - green(x, y).unwrap();
        ensure(d <= 0.0, || format!("G({x}, {z}) - G({x}, {y}) = {d:e}"))
    }))
}

pub fn interaction_nonpositive(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&ordered_any(2, 6), |xi| {
        let k = xi.len();
        let cfg = Configuration::new(xi.clone(), alternating_signs(k)).unwrap();
        let s = interaction_sum(&cfg);
        ensure(s <= 0.0, || format!("interaction sum {s:e} at {xi:?}"))
    }))
}

pub fn reduced_gradient_fd(cases: u32) -> Result<(), String> {
    let h = 1e-6;
    for k in 1..=5 {
        let strategy = (ordered(k), prop::collection::vec(-1.0f64..1.0, k), prop::collection::vec(any::<bool>(), k));
        report(runner(cases).run(&strategy, |(xi, dir, flips)| {
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            prop_assume!(norm > 1e-3);
            let v: Vec<f64> = dir.iter().map(|d| d / norm).collect();
            let signs: Vec<i8> = flips.iter().map(|&f| if f { 1 } else { -1 }).collect();
            let cfg = Configuration::new(xi.clone(), signs).unwrap();
            let shift = |s: f64| cfg.with_points(xi.iter().zip(&v).map(|(x, d)| x + s * d).collect()).unwrap();
            let fd = (reduced_value(&shift(h)) - reduced_value(&shift(-h))) / (2.0 * h);
            let g = reduced_grad(&cfg);
            let gv: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            let gnorm = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            ensure((fd - gv).abs() <= 1e-6 * gnorm.max(gv.abs()) + 1e-8, || {
                format!("k = {k}, xi = {xi:?}: directional {gv} vs difference {fd}")
            })
        }))?;
    }
    Ok(())
}

pub fn reflection_symmetry(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&ordered_any(1, 6), |xi| {
        let cfg = Configuration::alternating(xi.clone()).unwrap();
        let (a, b) = (reduced_value(&cfg), reduced_value(&cfg.reflected()));
        ensure((a - b).abs() <= 1e-12 * (1.0 + a.abs()), || format!("{a} vs {b} at {xi:?}"))
    }))
}

pub fn monotone_positivity(cases: u32) -> Result<(), String> {
    report(runner(cases).run(&ordered_any(1, 4), |xi| {
        let cfg = Configuration::alternating(xi.clone()).unwrap();
        let c = limit_profile_monotonicity(&cfg);
        ensure(c > 0.0, || format!("minimum {c:e} at {xi:?}"))
    }))
}

fn flip_operator() -> Arc<KernelOperator> {
    let mesh = Arc::new(Mesh::graded(64).unwrap());
    Arc::new(assemble_inverse(mesh).unwrap())
}

pub fn sign_flip_residual(cases: u32) -> Result<(), String> {
    let op = flip_operator();
    let n = op.len();
    let strategy = (prop::collection::vec(-20.0f64..20.0, n), 1e-3f64..1.0);
    report(runner(cases).run(&strategy, |(vals, lambda)| {
        let u = GridFunction::new(op.mesh().clone(), vals.clone()).unwrap();
        let neg = GridFunction::new(op.mesh().clone(), vals.iter().map(|v| -v).collect()).unwrap();
        let r = residual(&op, &u, lambda).unwrap();
        let rn = residual(&op, &neg, lambda).unwrap();
        let ok = r.values().iter().zip(rn.values()).all(|(a, b)| *a == -*b);
        ensure(ok, || "residual is not odd in u".into())
    }))
}
