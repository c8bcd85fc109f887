//! Post-solve checks: certified nodal count, peak structure and local masses,
//! convergence to the Green-function profile and monotonicity of that profile.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bubbles::{interaction_unchecked, Configuration};
use crate::error::{Error, Result};
use crate::green::{edge_sqrt, green_unchecked};
use crate::mesh::GridFunction;
use crate::solver::f_lambda;

/// Lower bound on `|u|` required inside the peak windows.
pub const PEAK_THRESHOLD: f64 = 1.0;
/// Safety factor on the outer-zone bound `c sqrt(2 d)`.
pub const OUTER_SAFETY: f64 = 0.5;
/// Width to which zeros are bisected.
pub const ZERO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CountMethod {
    /// All three zones certified.
    Certified,
    /// Zone certification failed with a sign change somewhere it should not
    /// be; zeros were counted directly.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalReport {
    pub zero_locations: Vec<f64>,
    pub nodal_count: usize,
    /// Mesh cell `[a, b]` in which each zero was bracketed.
    pub brackets: Vec<(f64, f64)>,
    pub method: CountMethod,
    /// Zone-splitting half width.
    pub epsilon: f64,
}

/// `min(xi_{i+1} - xi_i, 1 - |xi_1|, 1 - |xi_k|) / 4`: half of half the
/// smallest gap, so the windows `(xi_i - 2 eps, xi_i + 2 eps)` stay disjoint.
pub fn default_epsilon(cfg: &Configuration) -> f64 {
    0.25 * cfg.margin()
}

/// `sum_i a_i G(xi_i, x)`.
pub fn limit_profile(cfg: &Configuration, x: f64) -> f64 {
    cfg.xis()
        .iter()
        .enumerate()
        .map(|(i, &xi)| cfg.sign(i) * green_unchecked(xi, x))
        .sum()
}

/// `u_0'(x) sqrt(1 - x^2)` in the pole form `-(1/pi) sum_i a_i sqrt(1 - xi_i^2) / (x - xi_i)`,
/// which stays finite up to the endpoints.
fn weighted_slope(cfg: &Configuration, x: f64) -> f64 {
    -cfg.xis()
        .iter()
        .enumerate()
        .map(|(i, &xi)| cfg.sign(i) * edge_sqrt(xi) / (x - xi))
        .sum::<f64>()
        / PI
}

/// `min_j min_{x in (xi_j, xi_{j+1})} (-1)^j a_1 u_0'(x) sqrt(1 - x^2)` with
/// `xi_0 = -1`, `xi_{k+1} = 1`, sampled (endpoints of `I` included) and
/// refined around the sampled minimum.
pub fn limit_profile_monotonicity(cfg: &Configuration) -> f64 {
    let k = cfg.k();
    if k == 0 {
        return 0.0;
    }
    let a1 = cfg.sign(0);
    let mut knots = vec![-1.0];
    knots.extend_from_slice(cfg.xis());
    knots.push(1.0);
    let samples = 4000;
    let mut best = f64::INFINITY;
    for j in 0..=k {
        let (lo, hi) = (knots[j], knots[j + 1]);
        let sgn = if j % 2 == 0 { a1 } else { -a1 };
        let f = |x: f64| sgn * weighted_slope(cfg, x);
        // poles are excluded, the endpoints of I are not
        let first = if j == 0 { 0 } else { 1 };
        let last = if j == k { samples } else { samples - 1 };
        let h = (hi - lo) / samples as f64;
        let (mut arg, mut val) = (lo, f64::INFINITY);
        for m in first..=last {
            let x = lo + m as f64 * h;
            let v = f(x);
            if v < val {
                val = v;
                arg = x;
            }
        }
        // golden-section refinement on the bracketing sample cells
        let mut a = (arg - h).max(lo);
        let mut b = (arg + h).min(hi);
        if j > 0 {
            a = a.max(lo + 1e-3 * h);
        }
        if j < k {
            b = b.min(hi - 1e-3 * h);
        }
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        val = val.min(f(0.5 * (a + b))).min(f(a)).min(f(b));
        best = best.min(val);
    }
    best
}

fn bisect_zero(u: &GridFunction, mut a: f64, mut b: f64) -> f64 {
    let mut fa = u.eval(a);
    while b - a > ZERO_TOL {
        let m = 0.5 * (a + b);
        let fm = u.eval(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Zeros of the piecewise-linear interpolant strictly inside `(lo, hi)`,
/// from the sign pattern on the nodes and the end values.
fn zeros_in(u: &GridFunction, lo: f64, hi: f64) -> Vec<((f64, f64), f64)> {
    let mut pts = vec![(lo, u.eval(lo))];
    for (&x, &v) in u.mesh().nodes().iter().zip(u.values()) {
        if x > lo && x < hi {
            pts.push((x, v));
        }
    }
    pts.push((hi, u.eval(hi)));
    let mut out = Vec::new();
    let mut last_nonzero: Option<(f64, f64)> = None;
    for &(x, v) in &pts {
        if v == 0.0 {
            continue;
        }
        if let Some((px, pv)) = last_nonzero {
            if (pv > 0.0) != (v > 0.0) {
                out.push(((px, x), bisect_zero(u, px, x)));
            }
        }
        last_nonzero = Some((x, v));
    }
    out
}

fn raw_count(u: &GridFunction, epsilon: f64) -> NodalReport {
    let zeros = zeros_in(u, -1.0, 1.0);
    NodalReport {
        nodal_count: zeros.len() + 1,
        brackets: zeros.iter().map(|z| z.0).collect(),
        zero_locations: zeros.iter().map(|z| z.1).collect(),
        method: CountMethod::Raw,
        epsilon,
    }
}

/// Three-zone nodal count: no zeros near the boundary (`|u| >= c sqrt(2d)/2`
/// with `c` from [`limit_profile_monotonicity`]), none in the peak windows
/// (`|u| >= 1`), exactly one in each gap between consecutive windows whose
/// signs differ.
pub fn count_nodal_regions(u: &GridFunction, cfg: &Configuration, lambda: f64) -> Result<NodalReport> {
    count_nodal_regions_with(u, cfg, lambda, default_epsilon(cfg))
}

pub fn count_nodal_regions_with(u: &GridFunction, cfg: &Configuration, lambda: f64, epsilon: f64) -> Result<NodalReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let k = cfg.k();
    if !(epsilon > 0.0) || 2.0 * epsilon > cfg.margin() {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} does not fit the configuration")));
    }
    if k == 0 || !cfg.is_alternating() {
        return Ok(raw_count(u, epsilon));
    }
    let xi = cfg.xis();
    let c = limit_profile_monotonicity(cfg);
    let nodes = u.mesh().nodes();
    let vals = u.values();
    // a threshold dip without a sign change is ambiguous; a sign change in
    // the wrong place sends us to the raw count
    let mut dip: Option<f64> = None;
    let mut misplaced = false;

    let outer = [(-1.0, xi[0] - epsilon, cfg.sign(0)), (xi[k - 1] + epsilon, 1.0, cfg.sign(k - 1))];
    for &(lo, hi, s) in &outer {
        for (&x, &v) in nodes.iter().zip(vals) {
            if x > lo && x <= hi || (hi == 1.0 && x >= lo && x < hi) {
                let d = 1.0 - x.abs();
                if s * v <= 0.0 {
                    misplaced = true;
                } else if s * v < OUTER_SAFETY * c * (2.0 * d).sqrt() {
                    dip.get_or_insert(x);
                }
            }
        }
    }
    for (i, &p) in xi.iter().enumerate() {
        let s = cfg.sign(i);
        for (&x, &v) in nodes.iter().zip(vals) {
            if x > p - epsilon && x < p + epsilon {
                if s * v <= 0.0 {
                    misplaced = true;
                } else if s * v < PEAK_THRESHOLD {
                    dip.get_or_insert(x);
                }
            }
        }
    }
    let mut zeros = Vec::new();
    for i in 0..k.saturating_sub(1) {
        let (lo, hi) = (xi[i] + epsilon, xi[i + 1] - epsilon);
        let found = zeros_in(u, lo, hi);
        let left_ok = cfg.sign(i) * u.eval(lo) > 0.0;
        let right_ok = cfg.sign(i + 1) * u.eval(hi) > 0.0;
        if found.len() != 1 || !left_ok || !right_ok {
            misplaced = true;
        }
        zeros.extend(found);
    }
    if misplaced {
        return Ok(raw_count(u, epsilon));
    }
    if let Some(x) = dip {
        return Err(Error::AmbiguousZero(x));
    }
    Ok(NodalReport {
        nodal_count: zeros.len() + 1,
        brackets: zeros.iter().map(|z| z.0).collect(),
        zero_locations: zeros.iter().map(|z| z.1).collect(),
        method: CountMethod::Certified,
        epsilon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub location: f64,
    /// `a_i u` at the extremum.
    pub height: f64,
    pub sign: i8,
    pub local_mass: f64,
    /// `2 log(2 / lambda) - F_i`
    pub predicted_height: f64,
    pub height_gap: f64,
    /// `local_mass - a_i 2 pi`
    pub mass_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    /// Nodal-region boundaries used as mass windows.
    pub windows: Vec<(f64, f64)>,
}

/// `int_a^b lambda (e^u - e^-u)` by the trapezoid rule on the interpolant's
/// nodes, with the end values taken from the interpolant.
fn mass_on(u: &GridFunction, lambda: f64, a: f64, b: f64) -> f64 {
    let mut pts = vec![(a, u.eval(a))];
    for (&x, &v) in u.mesh().nodes().iter().zip(u.values()) {
        if x > a && x < b {
            pts.push((x, v));
        }
    }
    pts.push((b, u.eval(b)));
    pts.windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (f_lambda(w[0].1, lambda) + f_lambda(w[1].1, lambda)))
        .sum()
}

/// Peak locations, heights and masses. The windows are the nodal regions
/// when the zero count matches, otherwise the cells between midpoints of
/// consecutive points. Heights are compared with `2 log(2/lambda) - F_i`
/// evaluated at `cfg`.
pub fn peak_diagnostics(u: &GridFunction, cfg: &Configuration, lambda: f64) -> Result<PeakReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let k = cfg.k();
    let xi = cfg.xis();
    let zeros = count_nodal_regions(u, cfg, lambda)
        .map(|r| r.zero_locations)
        .unwrap_or_default();
    let mut cuts = vec![-1.0];
    if zeros.len() + 1 == k {
        cuts.extend(zeros);
    } else {
        cuts.extend(xi.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    }
    cuts.push(1.0);
    let nodes = u.mesh().nodes();
    let vals = u.values();
    let mut peaks = Vec::with_capacity(k);
    let mut windows = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = (cuts[i], cuts[i + 1]);
        let s = cfg.sign(i);
        let best = (0..nodes.len())
            .filter(|&j| nodes[j] > a && nodes[j] < b)
            .max_by(|&p, &q| (s * vals[p]).total_cmp(&(s * vals[q])));
        let Some(j) = best else { return Err(Error::MissingPeak(i)) };
        if !(s * vals[j] > 0.0) || j == 0 || j + 1 == nodes.len() {
            return Err(Error::MissingPeak(i));
        }
        // vertex of the parabola through the three nodes around the extremum
        let (x0, x1, x2) = (nodes[j - 1], nodes[j], nodes[j + 1]);
        let (y0, y1, y2) = (s * vals[j - 1], s * vals[j], s * vals[j + 1]);
        let d01 = (y1 - y0) / (x1 - x0);
        let d12 = (y2 - y1) / (x2 - x1);
        let curv = (d12 - d01) / (x2 - x0);
        let (location, height) = if curv < 0.0 {
            let xv = 0.5 * (x0 + x1) - d01 / (2.0 * curv);
            let xv = xv.clamp(x0, x2);
            (xv, y1 + d01 * (xv - x1) + curv * (xv - x0) * (xv - x1))
        } else {
            (x1, y1)
        };
        let predicted = 2.0 * (2.0 / lambda).ln() - interaction_unchecked(cfg, i);
        let local_mass = mass_on(u, lambda, a, b);
        peaks.push(Peak {
            location,
            height,
            sign: cfg.signs()[i],
            local_mass,
            predicted_height: predicted,
            height_gap: height - predicted,
            mass_error: local_mass - s * 2.0 * PI,
        });
        windows.push((a, b));
    }
    Ok(PeakReport { peaks, windows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConvergence {
    /// `sup |u - 2 pi sum a_i G_{xi_i}|` away from the peak windows.
    pub sup: f64,
    /// The same difference divided by `sqrt(1 - |x|)` on the two outer intervals.
    pub weighted_sup: f64,
}

pub fn profile_convergence(u: &GridFunction, cfg: &Configuration, lambda: f64, epsilon: f64) -> Result<ProfileConvergence> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let xi = cfg.xis();
    let k = cfg.k();
    if !(epsilon > 0.0) || (k > 0 && (xi[0] - epsilon <= -1.0 || xi[k - 1] + epsilon >= 1.0)) {
        return Err(Error::InvalidParameter(format!("epsilon {epsilon} reaches outside the interval")));
    }
    let mut sup: f64 = 0.0;
    let mut weighted: f64 = 0.0;
    for (&x, &v) in u.mesh().nodes().iter().zip(u.values()) {
        if xi.iter().any(|&p| (x - p).abs() < epsilon) {
            continue;
        }
        let diff = (v - 2.0 * PI * limit_profile(cfg, x)).abs();
        sup = sup.max(diff);
        let outer = k == 0 || x <= xi[0] - epsilon || x >= xi[k - 1] + epsilon;
        if outer {
            weighted = weighted.max(diff / (1.0 - x.abs()).sqrt());
        }
    }
    Ok(ProfileConvergence { sup, weighted_sup: weighted })
}
