//! Bubbles, their projections onto functions vanishing outside `I`, the
//! concentration-parameter rule and the signed multi-peak ansatz.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::{green_unchecked, robin_dxi_unchecked, robin_unchecked};

/// Scale and center of a single bubble `U(x) = log(2 delta / (delta^2 + (x - xi)^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub delta: f64,
    pub xi: f64,
}

impl BubbleParams {
    pub fn new(delta: f64, xi: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        if !xi.is_finite() {
            return Err(Error::InvalidParameter(format!("xi must be finite, got {xi}")));
        }
        Ok(Self { delta, xi })
    }

    /// Checks the small-scale regime where the projection expansions hold.
    fn expansion_regime(&self) -> Result<()> {
        if !(self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "projection expansion needs delta < 1, got {}",
                self.delta
            )));
        }
        if !(self.xi.abs() < 1.0) {
            return Err(Error::OutOfDomain(self.xi));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn exp_bubble(&self, x: f64) -> f64 {
        let t = x - self.xi;
        2.0 * self.delta / (self.delta * self.delta + t * t)
    }

    #[inline]
    pub(crate) fn z1(&self, x: f64) -> f64 {
        let t = x - self.xi;
        2.0 * self.delta * t / (self.delta * self.delta + t * t)
    }
}

/// Ordered interior points with a sign attached to each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    xis: Vec<f64>,
    signs: Vec<i8>,
    eta: f64,
}

impl Configuration {
    /// Validates ordering and interiority; the separation margin `eta` is set
    /// to half of the actual margin.
    pub fn new(xis: Vec<f64>, signs: Vec<i8>) -> Result<Self> {
        if xis.len() != signs.len() {
            return Err(Error::InvalidConfiguration(format!(
                "{} points but {} signs",
                xis.len(),
                signs.len()
            )));
        }
        if let Some(s) = signs.iter().find(|s| s.abs() != 1) {
            return Err(Error::InvalidConfiguration(format!("sign {s} is not +1 or -1")));
        }
        let mut cfg = Self { xis, signs, eta: 1.0 };
        let margin = cfg.margin();
        if !(margin > 0.0) {
            return Err(Error::InvalidConfiguration(format!(
                "points must be strictly ordered inside (-1, 1): {:?}",
                cfg.xis
            )));
        }
        cfg.eta = 0.5 * margin;
        Ok(cfg)
    }

    /// Signs `+, -, +, ...`.
    pub fn alternating(xis: Vec<f64>) -> Result<Self> {
        let signs = alternating_signs(xis.len());
        Self::new(xis, signs)
    }

    /// Equally spaced points `-1 + 2i/(k+1)`.
    pub fn equispaced(signs: Vec<i8>) -> Result<Self> {
        let k = signs.len();
        let xis = (1..=k).map(|i| -1.0 + 2.0 * i as f64 / (k + 1) as f64).collect();
        Self::new(xis, signs)
    }

    /// Requires membership in the margin-`eta` configuration set.
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || self.margin() <= eta {
            return Err(Error::InvalidConfiguration(format!(
                "margin {} does not exceed eta = {eta}",
                self.margin()
            )));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.xis.len()
    }

    pub fn xis(&self) -> &[f64] {
        &self.xis
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        self.signs[i] as f64
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `min(1 + xi_1, 1 - xi_k, min_i (xi_{i+1} - xi_i))`; 2 for the empty set.
    pub fn margin(&self) -> f64 {
        let (Some(first), Some(last)) = (self.xis.first(), self.xis.last()) else {
            return 2.0;
        };
        let mut m = (1.0 + first).min(1.0 - last);
        for w in self.xis.windows(2) {
            m = m.min(w[1] - w[0]);
        }
        if m.is_nan() {
            f64::NEG_INFINITY
        } else {
            m
        }
    }

    pub fn is_alternating(&self) -> bool {
        self.signs.windows(2).all(|w| w[0] == -w[1])
    }

    /// Mirror image `xi -> -reverse(xi)` with the signs carried along.
    pub fn reflected(&self) -> Self {
        Self {
            xis: self.xis.iter().rev().map(|x| -x).collect(),
            signs: self.signs.iter().rev().copied().collect(),
            eta: self.eta,
        }
    }

    /// Same signs, new points.
    pub fn with_points(&self, xis: Vec<f64>) -> Result<Self> {
        Self::new(xis, self.signs.clone())
    }

    pub fn negated(&self) -> Self {
        Self {
            xis: self.xis.clone(),
            signs: self.signs.iter().map(|s| -s).collect(),
            eta: self.eta,
        }
    }
}

pub fn alternating_signs(k: usize) -> Vec<i8> {
    (0..k).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()
}

pub fn bubble(p: BubbleParams, x: f64) -> Result<f64> {
    let p = BubbleParams::new(p.delta, p.xi)?;
    Ok(p.exp_bubble(x).ln())
}

/// Bounded kernel elements of the linearized Liouville equation:
/// `Z0 = (d^2 - t^2)/(d^2 + t^2)`, `Z1 = 2 d t/(d^2 + t^2)` with `t = x - xi`.
pub fn bubble_z(p: BubbleParams, index: usize, x: f64) -> Result<f64> {
    let p = BubbleParams::new(p.delta, p.xi)?;
    let t = x - p.xi;
    let d2 = p.delta * p.delta;
    match index {
        0 => Ok((d2 - t * t) / (d2 + t * t)),
        1 => Ok(p.z1(x)),
        _ => Err(Error::InvalidParameter(format!("kernel index must be 0 or 1, got {index}"))),
    }
}

/// Projected bubble `PU = U - log(2 delta) + 2 pi H(xi, x)`, accurate to
/// `O(delta^2)`; zero outside `I`.
pub fn proj_bubble(p: BubbleParams, x: f64) -> Result<f64> {
    p.expansion_regime()?;
    Ok(proj_bubble_unchecked(&p, x))
}

#[inline]
pub(crate) fn proj_bubble_unchecked(p: &BubbleParams, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    let t = x - p.xi;
    -(p.delta * p.delta + t * t).ln() + 2.0 * PI * robin_unchecked(p.xi, x)
}

/// Factor in front of `delta * dH/dxi` in the projected translation mode.
/// On the exterior `Z1 ~ 2 delta/(x - xi)` and `dH/dxi = (1/pi)/(xi - x)`,
/// so only `2 pi` cancels the `O(delta)` boundary trace.
pub const PZ1_CORRECTION: f64 = 2.0 * PI;

/// Projected translation mode `PZ1 = Z1 + 2 pi delta dH/dxi(xi, .)`, accurate
/// to `O(delta^3)`; zero outside `I`.
pub fn proj_z1(p: BubbleParams, x: f64) -> Result<f64> {
    p.expansion_regime()?;
    Ok(proj_z1_unchecked(&p, x))
}

#[inline]
pub(crate) fn proj_z1_unchecked(p: &BubbleParams, x: f64) -> f64 {
    if x.abs() >= 1.0 {
        return 0.0;
    }
    p.z1(x) + PZ1_CORRECTION * p.delta * robin_dxi_unchecked(p.xi, x)
}

/// `F_i = 2 pi H(xi_i, xi_i) + 2 pi a_i sum_{j != i} a_j G(xi_j, xi_i)`.
pub fn interaction_energy(cfg: &Configuration, i: usize) -> Result<f64> {
    if i >= cfg.k() {
        return Err(Error::InvalidParameter(format!("index {i} out of range for k = {}", cfg.k())));
    }
    Ok(interaction_unchecked(cfg, i))
}

pub(crate) fn interaction_unchecked(cfg: &Configuration, i: usize) -> f64 {
    let xi = cfg.xis();
    let mut cross = 0.0;
    for j in 0..cfg.k() {
        if j != i {
            cross += cfg.sign(j) * green_unchecked(xi[j], xi[i]);
        }
    }
    2.0 * PI * robin_unchecked(xi[i], xi[i]) + 2.0 * PI * cfg.sign(i) * cross
}

/// `delta_i = (lambda / 2) exp(F_i)`.
pub fn delta_choice(cfg: &Configuration, lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok((0..cfg.k())
        .map(|i| 0.5 * lambda * interaction_unchecked(cfg, i).exp())
        .collect())
}

/// Signed sum of projected bubbles with concentration parameters fixed by
/// [`delta_choice`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub config: Configuration,
    pub lambda: f64,
    pub deltas: Vec<f64>,
}

impl AnsatzSpec {
    pub fn new(config: Configuration, lambda: f64) -> Result<Self> {
        let deltas = delta_choice(&config, lambda)?;
        Ok(Self { config, lambda, deltas })
    }

    pub fn bubbles(&self) -> impl Iterator<Item = BubbleParams> + '_ {
        self.deltas
            .iter()
            .zip(self.config.xis())
            .map(|(&delta, &xi)| BubbleParams { delta, xi })
    }

    /// `sum_i a_i exp(U_i(x))`, which is `(-Delta)^{1/2}` of the ansatz on `I`.
    pub fn source(&self, x: f64) -> f64 {
        self.bubbles()
            .enumerate()
            .map(|(i, b)| self.config.sign(i) * b.exp_bubble(x))
            .sum()
    }

    pub(crate) fn value_unchecked(&self, x: f64) -> f64 {
        self.bubbles()
            .enumerate()
            .map(|(i, b)| self.config.sign(i) * proj_bubble_unchecked(&b, x))
            .sum()
    }
}

/// `omega(x) = sum_i a_i PU_{delta_i, xi_i}(x)`.
pub fn ansatz(spec: &AnsatzSpec, x: f64) -> Result<f64> {
    for b in spec.bubbles() {
        b.expansion_regime()?;
    }
    Ok(spec.value_unchecked(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green;
    use crate::quadrature::integrate;
    use approx::assert_relative_eq;

    const T: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
    const F_K2: f64 = -0.523_248_143_764_547_8; // 2 log(4 / (3 sqrt 3))

    #[test]
    fn bubble_values() {
        let p = BubbleParams::new(1.0, 0.0).unwrap();
        assert_relative_eq!(bubble(p, 0.0).unwrap(), 2f64.ln(), max_relative = 1e-15);
        let p = BubbleParams::new(0.01, 0.3).unwrap();
        assert_relative_eq!(bubble(p, 0.3).unwrap(), 5.298_317_366_548_036, max_relative = 1e-14);
        assert!(BubbleParams::new(0.0, 0.0).is_err());
        assert!(bubble(BubbleParams { delta: -1.0, xi: 0.0 }, 0.0).is_err());
    }

    #[test]
    fn bubble_mass_is_two_pi() {
        let p = BubbleParams::new(0.05, 0.2).unwrap();
        // split the real line with t = tan(s)
        let r = integrate(
            |s: f64| {
                let x = p.xi + s.tan();
                p.exp_bubble(x) / s.cos().powi(2)
            },
            -PI / 2.0,
            PI / 2.0,
            &[0.0],
            1e-13,
            1e-13,
        );
        assert_relative_eq!(r.value, 2.0 * PI, max_relative = 1e-11);
    }

    #[test]
    fn kernel_modes() {
        let p = BubbleParams::new(1.0, 0.0).unwrap();
        assert_eq!(bubble_z(p, 0, 0.0).unwrap(), 1.0);
        assert_eq!(bubble_z(p, 1, 0.0).unwrap(), 0.0);
        assert!(bubble_z(p, 2, 0.0).is_err());
        // weighted orthogonality on R, via y = tan(s)
        let r = integrate(
            |s: f64| {
                let y = s.tan();
                let w = 2.0 / (1.0 + y * y);
                w * bubble_z(p, 0, y).unwrap() * bubble_z(p, 1, y).unwrap() / s.cos().powi(2)
            },
            -PI / 2.0,
            PI / 2.0,
            &[0.0],
            1e-14,
            1e-14,
        );
        assert!(r.value.abs() < 1e-13);
    }

    #[test]
    fn proj_bubble_reference_values() {
        let p = BubbleParams::new(1e-3, 0.0).unwrap();
        let at_center = 2.0 * (1e3f64).ln() + 2.0 * 2f64.ln();
        assert_relative_eq!(proj_bubble(p, 0.0).unwrap(), at_center, max_relative = 1e-6);
        assert_relative_eq!(proj_bubble(p, 0.0).unwrap(), 15.201_804_919_084_16, max_relative = 1e-6);
        // far branch: 2 pi G(0, 0.8) = 2 log 2
        let far = 2.0 * PI * green(0.0, 0.8).unwrap();
        assert_relative_eq!(far, 2.0 * 2f64.ln(), max_relative = 1e-14);
        assert!((proj_bubble(p, 0.8).unwrap() - far).abs() < 1e-5);
        assert_eq!(proj_bubble(p, 1.5).unwrap(), 0.0);
        assert!(proj_bubble(BubbleParams { delta: 1.0, xi: 0.0 }, 0.0).is_err());
    }

    #[test]
    fn proj_z1_reference_values() {
        let p = BubbleParams::new(1e-3, 0.0).unwrap();
        assert_eq!(proj_z1(p, 0.0).unwrap(), 0.0);
        // Z1(0.5) + 2 pi delta dH/dxi(0, 0.5)
        let expected = 0.003_999_984_000_064 + 2.0 * PI * 1e-3 * -0.085_290_876_945_789_3;
        assert_relative_eq!(proj_z1(p, 0.5).unwrap(), expected, max_relative = 1e-12);
        // Z1 decays like 2 delta / |x - xi|
        for &x in &[-0.9, -0.5, -0.1, 0.1, 0.5, 0.9] {
            assert!(proj_z1(p, x).unwrap().abs() < 2.5 * p.delta / x.abs() + p.delta);
        }
    }

    #[test]
    fn interaction_energy_values() {
        let one = Configuration::alternating(vec![0.0]).unwrap();
        assert_relative_eq!(interaction_energy(&one, 0).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-14);
        let two = Configuration::alternating(vec![-T, T]).unwrap();
        for i in 0..2 {
            assert_relative_eq!(interaction_energy(&two, i).unwrap(), F_K2, max_relative = 1e-13);
            assert_relative_eq!(
                interaction_energy(&two, i).unwrap(),
                interaction_energy(&two.negated(), i).unwrap(),
                max_relative = 1e-15
            );
        }
        assert!(interaction_energy(&two, 2).is_err());
    }

    #[test]
    fn delta_choice_values() {
        let one = Configuration::alternating(vec![0.0]).unwrap();
        assert_relative_eq!(delta_choice(&one, 0.01).unwrap()[0], 0.02, max_relative = 1e-14);
        for lambda in [1e-3, 1e-5, 1e-8] {
            assert_relative_eq!(delta_choice(&one, lambda).unwrap()[0] / lambda, 2.0, max_relative = 1e-14);
        }
        let two = Configuration::alternating(vec![-T, T]).unwrap();
        let d = delta_choice(&two, 0.01).unwrap();
        // (lambda/2) * 16/27 ... exp(F) = 16/27
        assert_relative_eq!(d[0], 0.005 * 16.0 / 27.0, max_relative = 1e-13);
        assert_relative_eq!(d[0], d[1], max_relative = 1e-14);
        assert!(delta_choice(&two, 0.0).is_err());
        assert!(delta_choice(&two, -1.0).is_err());
    }

    #[test]
    fn delta_choice_increases_with_lambda() {
        let cfg = Configuration::alternating(vec![-0.6, 0.1, 0.7]).unwrap();
        let mut prev = delta_choice(&cfg, 1e-4).unwrap();
        for lambda in [2e-4, 1e-3, 0.01, 0.1] {
            let d = delta_choice(&cfg, lambda).unwrap();
            assert!(d.iter().zip(&prev).all(|(a, b)| a > b));
            prev = d;
        }
    }

    #[test]
    fn ansatz_symmetries() {
        let one = AnsatzSpec::new(Configuration::alternating(vec![0.0]).unwrap(), 0.01).unwrap();
        let p = BubbleParams::new(one.deltas[0], 0.0).unwrap();
        for x in [-0.7, 0.0, 0.3] {
            assert_eq!(ansatz(&one, x).unwrap(), proj_bubble(p, x).unwrap());
        }
        let two = AnsatzSpec::new(Configuration::alternating(vec![-T, T]).unwrap(), 0.01).unwrap();
        assert!(ansatz(&two, 0.0).unwrap().abs() < 1e-13);
        assert_eq!(ansatz(&two, 1.2).unwrap(), 0.0);
    }

    #[test]
    fn ansatz_far_field_is_green_profile() {
        let lambda = 1e-3;
        let cfg = Configuration::alternating(vec![-0.5, 0.4]).unwrap();
        let spec = AnsatzSpec::new(cfg.clone(), lambda).unwrap();
        for x in [-0.95, -0.1, 0.0, 0.9] {
            let limit: f64 = (0..2)
                .map(|i| 2.0 * PI * cfg.sign(i) * green(cfg.xis()[i], x).unwrap())
                .sum();
            assert!((ansatz(&spec, x).unwrap() - limit).abs() < 10.0 * lambda * lambda);
        }
    }

    #[test]
    fn configuration_validation() {
        assert!(Configuration::alternating(vec![0.2, 0.1]).is_err());
        assert!(Configuration::alternating(vec![-1.0, 0.1]).is_err());
        assert!(Configuration::new(vec![0.0], vec![2]).is_err());
        assert!(Configuration::new(vec![0.0, 0.5], vec![1]).is_err());
        let cfg = Configuration::alternating(vec![-0.5, 0.5]).unwrap();
        assert_eq!(cfg.margin(), 0.5);
        assert!(cfg.clone().with_eta(0.4).is_ok());
        assert!(cfg.with_eta(0.6).is_err());
        let r = Configuration::alternating(vec![-0.6, 0.1, 0.7]).unwrap().reflected();
        assert_eq!(r.xis(), &[-0.7, -0.1, 0.6]);
    }
}
