//! The reduced functional `sum_i H(xi_i, xi_i) + sum_{i != j} a_i a_j G(xi_i, xi_j)`,
//! its gradient, maximization and classification of critical points.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bubbles::Configuration;
use crate::error::{Error, Result};
use crate::green::{green_dx_unchecked, green_unchecked, robin_dxi_unchecked, robin_unchecked};

/// Step of the central differences that build the Hessian from the gradient.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Max-norm radius used to merge critical points found from different starts.
pub const CLUSTER_RADIUS: f64 = 1e-4;
/// A start is declared divergent once its smallest gap falls below this.
pub const COLLAPSE_GAP: f64 = 1e-10;

const BFGS_MAX_ITER: usize = 3000;
const NEWTON_MAX_ITER: usize = 60;

pub fn reduced_value(cfg: &Configuration) -> f64 {
    value_at(cfg.xis(), cfg.signs())
}

fn value_at(xi: &[f64], signs: &[i8]) -> f64 {
    let k = xi.len();
    let mut v = 0.0;
    for i in 0..k {
        v += robin_unchecked(xi[i], xi[i]);
        for j in (i + 1)..k {
            v += 2.0 * (signs[i] * signs[j]) as f64 * green_unchecked(xi[i], xi[j]);
        }
    }
    v
}

/// The interaction part `sum_{i != j} a_i a_j G(xi_i, xi_j)` alone.
pub fn interaction_sum(cfg: &Configuration) -> f64 {
    value_at(cfg.xis(), cfg.signs()) - cfg.xis().iter().map(|&x| robin_unchecked(x, x)).sum::<f64>()
}

pub fn reduced_grad(cfg: &Configuration) -> Vec<f64> {
    grad_at(cfg.xis(), cfg.signs())
}

fn grad_at(xi: &[f64], signs: &[i8]) -> Vec<f64> {
    let k = xi.len();
    (0..k)
        .map(|i| {
            // d/dxi H(xi, xi) = 2 dH/dxi by symmetry of H
            let mut g = 2.0 * robin_dxi_unchecked(xi[i], xi[i]);
            let mut cross = 0.0;
            for j in 0..k {
                if j != i {
                    cross += signs[j] as f64 * green_dx_unchecked(xi[j], xi[i]);
                }
            }
            g += 2.0 * signs[i] as f64 * cross;
            g
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn admissible(xi: &[f64]) -> bool {
    let mut prev = -1.0;
    for &x in xi {
        if !(x > prev) {
            return false;
        }
        prev = x;
    }
    prev < 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Max,
    Saddle,
    Min,
    Degenerate,
}

impl Classification {
    pub fn from_eigs(eigs: &[f64]) -> Self {
        let scale = eigs.iter().fold(1.0f64, |m, e| m.max(e.abs()));
        let margin = 1e-6 * scale;
        if eigs.iter().any(|e| e.abs() <= margin) {
            Classification::Degenerate
        } else if eigs.iter().all(|&e| e < 0.0) {
            Classification::Max
        } else if eigs.iter().all(|&e| e > 0.0) {
            Classification::Min
        } else {
            Classification::Saddle
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Max => "max",
            Classification::Saddle => "saddle",
            Classification::Min => "min",
            Classification::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub config: Configuration,
    pub value: f64,
    pub grad_norm: f64,
    /// Ascending.
    pub hessian_eigs: Vec<f64>,
    pub classification: Classification,
}

/// Symmetrized central-difference Hessian of the analytic gradient.
pub fn reduced_hessian(cfg: &Configuration) -> DMatrix<f64> {
    hessian_at(cfg.xis(), cfg.signs())
}

fn hessian_at(xi: &[f64], signs: &[i8]) -> DMatrix<f64> {
    let k = xi.len();
    let mut h = DMatrix::<f64>::zeros(k, k);
    let mut p = xi.to_vec();
    for j in 0..k {
        p[j] = xi[j] + HESSIAN_STEP;
        let gp = grad_at(&p, signs);
        p[j] = xi[j] - HESSIAN_STEP;
        let gm = grad_at(&p, signs);
        p[j] = xi[j];
        for i in 0..k {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * HESSIAN_STEP);
        }
    }
    let ht = h.transpose();
    (h + ht) * 0.5
}

/// Evaluates value, gradient and Hessian spectrum at `cfg`.
pub fn analyze(cfg: &Configuration) -> EnergyReport {
    let grad = reduced_grad(cfg);
    let eig = SymmetricEigen::new(reduced_hessian(cfg));
    let mut eigs: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigs.sort_by(f64::total_cmp);
    EnergyReport {
        config: cfg.clone(),
        value: reduced_value(cfg),
        grad_norm: norm(&grad),
        classification: Classification::from_eigs(&eigs),
        hessian_eigs: eigs,
    }
}

/// Ordered interior points from `k` free logits: the `k + 1` gaps are
/// `2 softmax(z, 0)`.
struct GapMap {
    k: usize,
}

impl GapMap {
    fn gaps(&self, z: &[f64]) -> Vec<f64> {
        let m = z.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        e.push((-m).exp());
        let s: f64 = e.iter().sum();
        e.iter().map(|v| 2.0 * v / s).collect()
    }

    fn points(&self, gaps: &[f64]) -> Vec<f64> {
        let mut acc = -1.0;
        gaps[..self.k]
            .iter()
            .map(|g| {
                acc += g;
                acc
            })
            .collect()
    }

    /// Chain rule from d/dxi to d/dz.
    fn pull_back(&self, gaps: &[f64], grad_xi: &[f64]) -> Vec<f64> {
        let k = self.k;
        // S_m = sum_{i >= m} dF/dxi_i; the last gap moves no point
        let mut s = vec![0.0; k + 1];
        for m in (0..k).rev() {
            s[m] = s[m + 1] + grad_xi[m];
        }
        let mean: f64 = gaps.iter().zip(&s).map(|(g, s)| g * s).sum::<f64>() * 0.5;
        (0..k).map(|n| gaps[n] * (s[n] - mean)).collect()
    }
}

enum AscentOutcome {
    Stationary(Vec<f64>),
    Diverged,
    Stalled,
}

/// BFGS ascent of the functional in gap coordinates.
fn ascend(z0: &[f64], signs: &[i8]) -> AscentOutcome {
    let k = z0.len();
    let map = GapMap { k };
    let eval = |z: &[f64]| -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let gaps = map.gaps(z);
        let xi = map.points(&gaps);
        if !admissible(&xi) || gaps.iter().any(|&g| !(g > 0.0)) {
            return None;
        }
        let v = value_at(&xi, signs);
        let gz = map.pull_back(&gaps, &grad_at(&xi, signs));
        v.is_finite().then_some((v, gz, gaps))
    };
    let mut z = z0.to_vec();
    let Some((mut v, mut g, mut gaps)) = eval(&z) else {
        return AscentOutcome::Stalled;
    };
    let mut hinv = DMatrix::<f64>::identity(k, k);
    for _ in 0..BFGS_MAX_ITER {
        let min_gap = gaps.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let xi = map.points(&gaps);
        if min_gap < COLLAPSE_GAP && norm(&grad_at(&xi, signs)) > 1.0 {
            return AscentOutcome::Diverged;
        }
        if norm(&g) < 1e-11 {
            return AscentOutcome::Stationary(xi);
        }
        let gv = DVector::from_column_slice(&g);
        let mut dir = &hinv * &gv;
        if dir.dot(&gv) <= 0.0 {
            hinv = DMatrix::identity(k, k);
            dir = gv.clone();
        }
        let slope = dir.dot(&gv);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + alpha * d).collect();
            if let Some((tv, tg, tgaps)) = eval(&trial) {
                if tv >= v + 1e-4 * alpha * slope {
                    accepted = Some((trial, tv, tg, tgaps));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((zn, vn, gn, gapsn)) = accepted else {
            let xi = map.points(&gaps);
            return if norm(&grad_at(&xi, signs)) < 1e-6 {
                AscentOutcome::Stationary(xi)
            } else if min_gap < 1e-6 {
                AscentOutcome::Diverged
            } else {
                AscentOutcome::Stalled
            };
        };
        // BFGS update for the minimization of -F
        let s = DVector::from_iterator(k, zn.iter().zip(&z).map(|(a, b)| a - b));
        let y = DVector::from_iterator(k, gn.iter().zip(&g).map(|(a, b)| b - a));
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(k, k);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
        }
        z = zn;
        v = vn;
        g = gn;
        gaps = gapsn;
    }
    let xi = map.points(&gaps);
    if norm(&grad_at(&xi, signs)) < 1e-6 {
        AscentOutcome::Stationary(xi)
    } else {
        AscentOutcome::Stalled
    }
}

/// Damped Newton on the gradient, staying inside the ordered set.
fn newton_critical(xi0: &[f64], signs: &[i8], tol: f64) -> Option<Vec<f64>> {
    let mut xi = xi0.to_vec();
    let mut g = grad_at(&xi, signs);
    let mut gn = norm(&g);
    for _ in 0..NEWTON_MAX_ITER {
        if gn <= 0.1 * tol {
            break;
        }
        let h = hessian_at(&xi, signs);
        let step = h.lu().solve(&DVector::from_column_slice(&g))?;
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-10 {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, s)| a - alpha * s).collect();
            if admissible(&trial) {
                let tg = grad_at(&trial, signs);
                let tn = norm(&tg);
                if tn.is_finite() && tn < gn {
                    xi = trial;
                    g = tg;
                    gn = tn;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (gn <= tol).then_some(xi)
}

fn start_logits(k: usize, index: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if index == 0 {
        vec![0.0; k]
    } else {
        (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect()
    }
}

fn check_signs(k: usize, signs: &[i8]) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if signs.len() != k || signs.iter().any(|s| s.abs() != 1) {
        return Err(Error::InvalidConfiguration(format!("need {k} signs of +-1, got {signs:?}")));
    }
    Ok(())
}

/// Default seed of the multistart generator.
pub const DEFAULT_SEED: u64 = 0;

pub fn maximize(k: usize, signs: &[i8], seeds: usize, tol: f64) -> Result<EnergyReport> {
    maximize_seeded(k, signs, seeds, tol, DEFAULT_SEED)
}

/// Multistart ascent: start 0 is the equispaced configuration, the rest are
/// drawn from a ChaCha8 stream. Each ascent that settles is polished by
/// Newton on the gradient; the highest critical point wins.
pub fn maximize_seeded(k: usize, signs: &[i8], seeds: usize, tol: f64, rng_seed: u64) -> Result<EnergyReport> {
    check_signs(k, signs)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<EnergyReport> = None;
    for s in 0..seeds.max(1) {
        let z0 = start_logits(k, s, &mut rng);
        let AscentOutcome::Stationary(xi) = ascend(&z0, signs) else { continue };
        let Some(xi) = newton_critical(&xi, signs, tol) else { continue };
        let Ok(cfg) = Configuration::new(xi, signs.to_vec()) else { continue };
        let report = analyze(&cfg);
        if best.as_ref().is_none_or(|b| report.value > b.value) {
            best = Some(report);
        }
    }
    best.ok_or(Error::NoCriticalPoint)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    /// First point pushed towards -1.
    Endpoint,
    /// First two points pushed together around their midpoint.
    Neighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowdownRow {
    pub approach: Approach,
    pub distance: f64,
    pub value: f64,
}

/// Values on configurations approaching the boundary of the ordered set,
/// starting from the equispaced configuration.
pub fn boundary_blowdown_probe(k: usize, signs: &[i8], margins: &[f64]) -> Result<Vec<BlowdownRow>> {
    check_signs(k, signs)?;
    let base = Configuration::equispaced(signs.to_vec())?;
    let mut rows = Vec::new();
    for &eps in margins {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("margin must be positive, got {eps}")));
        }
        let mut xi = base.xis().to_vec();
        xi[0] = -1.0 + eps;
        let cfg = base.with_points(xi)?;
        rows.push(BlowdownRow { approach: Approach::Endpoint, distance: eps, value: reduced_value(&cfg) });
    }
    if k >= 2 {
        for &eps in margins {
            let mut xi = base.xis().to_vec();
            let mid = 0.5 * (xi[0] + xi[1]);
            xi[0] = mid - 0.5 * eps;
            xi[1] = mid + 0.5 * eps;
            let cfg = base.with_points(xi)?;
            rows.push(BlowdownRow { approach: Approach::Neighbor, distance: eps, value: reduced_value(&cfg) });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCluster {
    pub xi: Vec<f64>,
    pub value: f64,
    pub classification: Classification,
    pub hits: usize,
}

/// Evidence gathered for the uniqueness question; never authoritative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjectureSummary {
    pub k: usize,
    pub signs: Vec<i8>,
    pub n_starts: usize,
    pub seed: u64,
    pub clusters: Vec<CriticalCluster>,
    /// Starts whose ascent ran into the boundary.
    pub diverged: usize,
    /// Starts that neither settled nor diverged.
    pub inconclusive: usize,
    pub authoritative: bool,
}

impl ConjectureSummary {
    pub fn distinct(&self) -> usize {
        self.clusters.len()
    }
}

/// Runs both the ascent and a plain Newton search on the gradient from every
/// seeded start and clusters what they find.
pub fn conjecture_probe(k: usize, signs: &[i8], n_starts: usize, seed: u64) -> Result<ConjectureSummary> {
    check_signs(k, signs)?;
    let tol = 1e-10;
    let map = GapMap { k };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clusters: Vec<CriticalCluster> = Vec::new();
    let (mut diverged, mut inconclusive) = (0, 0);
    let record = |xi: Vec<f64>, clusters: &mut Vec<CriticalCluster>| {
        if let Some(c) = clusters.iter_mut().find(|c| {
            c.xi.iter().zip(&xi).all(|(a, b)| (a - b).abs() <= CLUSTER_RADIUS)
        }) {
            c.hits += 1;
            return;
        }
        if let Ok(cfg) = Configuration::new(xi.clone(), signs.to_vec()) {
            let r = analyze(&cfg);
            clusters.push(CriticalCluster { xi, value: r.value, classification: r.classification, hits: 1 });
        }
    };
    for s in 0..n_starts {
        let z0 = start_logits(k, s, &mut rng);
        match ascend(&z0, signs) {
            AscentOutcome::Stationary(xi) => match newton_critical(&xi, signs, tol) {
                Some(xi) => record(xi, &mut clusters),
                None => inconclusive += 1,
            },
            AscentOutcome::Diverged => diverged += 1,
            AscentOutcome::Stalled => inconclusive += 1,
        }
        let start = map.points(&map.gaps(&z0));
        if let Some(xi) = newton_critical(&start, signs, tol) {
            record(xi, &mut clusters);
        }
    }
    clusters.sort_by(|a, b| b.value.total_cmp(&a.value));
    Ok(ConjectureSummary {
        k,
        signs: signs.to_vec(),
        n_starts,
        seed,
        clusters,
        diverged,
        inconclusive,
        authoritative: false,
    })
}
