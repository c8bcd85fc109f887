//! Glue between the solver and the post-solve checks: analyses a converged
//! step against the limiting configuration and runs whole sweeps.

use serde::{Deserialize, Serialize};

use crate::bubbles::{alternating_signs, Configuration};
use crate::error::{Error, Result};
use crate::reduced::{maximize_seeded, EnergyReport};
use crate::solver::{
    ansatz_energy, continuation, energy, linearized_smallest_singulars, AnsatzEnergy, ContinuationOptions,
    ContinuationOutcome, ContinuationStep,
};
use crate::verify::{
    count_nodal_regions, default_epsilon, peak_diagnostics, profile_convergence, NodalReport, PeakReport,
    ProfileConvergence,
};

/// Multistart count used when the limiting points come from maximization.
pub const DEFAULT_STARTS: usize = 16;

/// Parses a sign pattern such as `+-+`, or `alternating` for `k` signs.
pub fn parse_signs(pattern: &str, k: usize) -> Result<Vec<i8>> {
    let p = pattern.trim();
    if p.is_empty() || p.eq_ignore_ascii_case("alternating") {
        return Ok(alternating_signs(k));
    }
    let signs: Vec<i8> = p
        .chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            _ => Err(Error::InvalidConfiguration(format!("bad sign character {c:?} in {p:?}"))),
        })
        .collect::<Result<_>>()?;
    if signs.len() != k {
        return Err(Error::InvalidConfiguration(format!("{} signs given for k = {k}", signs.len())));
    }
    Ok(signs)
}

pub fn format_signs(signs: &[i8]) -> String {
    signs.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

/// Critical point of the reduced energy for `k` and `signs`.
pub fn limit_configuration(k: usize, signs: &[i8], seed: u64) -> Result<EnergyReport> {
    maximize_seeded(k, signs, DEFAULT_STARTS, 1e-12, seed)
}

/// Everything measured on one converged step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAnalysis {
    pub lambda: f64,
    pub residual_sup: f64,
    pub newton_iters: usize,
    pub mesh_nodes: usize,
    /// `Err` holds the message of a failed certification.
    pub nodal: std::result::Result<NodalReport, String>,
    pub peaks: std::result::Result<PeakReport, String>,
    pub energy: f64,
    pub ansatz: AnsatzMeasure,
    /// Located points of the orthogonal decomposition.
    pub points: Vec<f64>,
    pub remainder_sup: Option<f64>,
    pub profile: Option<ProfileConvergence>,
    pub sigma_full: Option<f64>,
    pub sigma_perp: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzMeasure {
    pub norm_sq: f64,
    pub norm_sq_prediction: f64,
    pub energy: f64,
    pub energy_prediction: f64,
}

impl From<AnsatzEnergy> for AnsatzMeasure {
    fn from(a: AnsatzEnergy) -> Self {
        Self {
            norm_sq: a.norm_sq,
            norm_sq_prediction: a.norm_sq_prediction,
            energy: a.energy,
            energy_prediction: a.energy_prediction,
        }
    }
}

impl AnsatzMeasure {
    pub fn norm_gap(&self) -> f64 {
        (self.norm_sq - self.norm_sq_prediction).abs()
    }

    pub fn energy_gap(&self) -> f64 {
        (self.energy - self.energy_prediction).abs()
    }
}

impl StepAnalysis {
    pub fn nodal_count(&self) -> Option<usize> {
        self.nodal.as_ref().ok().map(|n| n.nodal_count)
    }
}

/// Analyses `step` against the limiting configuration `cfg`.
pub fn analyze_step(step: &ContinuationStep, cfg: &Configuration, with_sigma: bool) -> Result<StepAnalysis> {
    let r = &step.report;
    let u = &r.solution;
    let lambda = r.lambda;
    let op = &step.operator;
    let nodal = count_nodal_regions(u, cfg, lambda).map_err(|e| e.to_string());
    let peaks = peak_diagnostics(u, cfg, lambda).map_err(|e| e.to_string());
    let profile = if cfg.k() > 0 { profile_convergence(u, cfg, lambda, default_epsilon(cfg)).ok() } else { None };
    let ansatz = ansatz_energy(&step.ansatz, op.mesh().clone())?.into();
    let (sigma_full, sigma_perp) = if with_sigma {
        let (f, p) = linearized_smallest_singulars(op, u, lambda, &step.points)?;
        (Some(f), Some(p))
    } else {
        (None, None)
    };
    Ok(StepAnalysis {
        lambda,
        residual_sup: r.residual_sup,
        newton_iters: r.newton_iters,
        mesh_nodes: op.len(),
        nodal,
        peaks,
        energy: energy(op, u, lambda)?,
        ansatz,
        points: step.points.xis().to_vec(),
        remainder_sup: r.diagnostics.remainder_sup,
        profile,
        sigma_full,
        sigma_perp,
    })
}

/// A sweep together with the per-step analyses.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub config: Configuration,
    pub outcome: ContinuationOutcome,
    pub analyses: Vec<StepAnalysis>,
}

pub fn run_sweep(
    cfg: &Configuration,
    lambda_start: f64,
    lambda_end: f64,
    factor: f64,
    opts: ContinuationOptions,
    with_sigma: bool,
) -> Result<Sweep> {
    let outcome = continuation(cfg, lambda_start, lambda_end, factor, opts)?;
    let analyses = outcome
        .steps
        .iter()
        .map(|s| analyze_step(s, cfg, with_sigma))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep { config: cfg.clone(), outcome, analyses })
}
