//! Green function of the half Laplacian on `I = (-1, 1)` with the exterior
//! condition `u = 0` on `R \ I`, its regular part, and first derivatives.
//!
//! With `s(t) = sqrt((1 - t)(1 + t))`:
//!
//! ```text
//! G(xi, x) = (1/pi) log((1 - xi x + s(xi) s(x)) / |x - xi|)   for x in I
//! H(xi, x) = (1/pi) log(1 - xi x + s(xi) s(x))
//! ```
//!
//! `G` vanishes identically outside `I`. The regular part is evaluated from its
//! own closed form, never as `G - (1/pi) log(1/|x - xi|)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// `sqrt(1 - t^2)` in factored form.
#[inline]
pub(crate) fn edge_sqrt(t: f64) -> f64 {
    ((1.0 - t) * (1.0 + t)).max(0.0).sqrt()
}

#[inline]
pub(crate) fn robin_unchecked(xi: f64, x: f64) -> f64 {
    (1.0 - xi * x + edge_sqrt(xi) * edge_sqrt(x)).ln() / PI
}

#[inline]
pub(crate) fn green_unchecked(xi: f64, x: f64) -> f64 {
    if x.abs() >= 1.0 || xi.abs() >= 1.0 {
        return 0.0;
    }
    ((1.0 - xi * x + edge_sqrt(xi) * edge_sqrt(x)) / (x - xi).abs()).ln() / PI
}

#[inline]
pub(crate) fn green_dx_unchecked(xi: f64, x: f64) -> f64 {
    -edge_sqrt(xi) / ((x - xi) * edge_sqrt(x)) / PI
}

#[inline]
pub(crate) fn robin_dxi_unchecked(xi: f64, x: f64) -> f64 {
    if x.abs() > 1.0 {
        return 1.0 / (PI * (xi - x));
    }
    let sx = edge_sqrt(x);
    let sxi = edge_sqrt(xi);
    -(x + xi * sx / sxi) / (1.0 - x * xi + sxi * sx) / PI
}

fn check_pole(xi: f64) -> Result<()> {
    if !(xi.abs() < 1.0) {
        return Err(Error::OutOfDomain(xi));
    }
    Ok(())
}

/// `G(xi, x)`. Symmetric in its arguments; exactly zero for `|x| >= 1`.
pub fn green(xi: f64, x: f64) -> Result<f64> {
    check_pole(xi)?;
    if x.is_nan() {
        return Err(Error::OutOfDomain(x));
    }
    if x == xi {
        return Err(Error::SingularPoint(xi));
    }
    Ok(green_unchecked(xi, x))
}

/// Regular part `H(xi, x)`; the diagonal `x == xi` is admitted and equals
/// `(1/pi) log(2 (1 - xi^2))`.
pub fn robin(xi: f64, x: f64) -> Result<f64> {
    check_pole(xi)?;
    if !(x.abs() <= 1.0) {
        return Err(Error::OutOfDomain(x));
    }
    Ok(robin_unchecked(xi, x))
}

/// `d/dx G(xi, x)`; positive left of the pole, negative right of it.
pub fn green_dx(xi: f64, x: f64) -> Result<f64> {
    check_pole(xi)?;
    if !(x.abs() < 1.0) {
        return Err(Error::OutOfDomain(x));
    }
    if x == xi {
        return Err(Error::SingularPoint(xi));
    }
    Ok(green_dx_unchecked(xi, x))
}

/// `d/dxi H(xi, x)`. Interior branch for `|x| <= 1`, and `(1/pi)/(xi - x)`
/// for `|x| > 1`, where `H` reduces to `(1/pi) log|x - xi|`.
pub fn robin_dxi(xi: f64, x: f64) -> Result<f64> {
    check_pole(xi)?;
    if x.is_nan() {
        return Err(Error::OutOfDomain(x));
    }
    Ok(robin_dxi_unchecked(xi, x))
}
