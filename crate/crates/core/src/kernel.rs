//! Nyström discretization of `(-Delta)^{-1/2} f (x) = int_I G(x, y) f(y) dy`.
//!
//! The density is replaced by its piecewise-linear interpolant on the mesh
//! (held constant on the two end cells). On cells close to the collocation
//! point the kernel is split as `G = -(1/pi) log|x - y| + H(x, y)`: the
//! logarithm is integrated exactly against the hat functions and `H` with
//! Gauss-Legendre. Remote cells use Gauss-Legendre on `G` directly.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::green::{green_unchecked, robin_unchecked};
use crate::mesh::{GridFunction, Mesh};
use crate::quadrature::gauss_legendre;

const GAUSS_POINTS: usize = 6;
/// Cells closer than this many widths to the collocation point get the
/// singular treatment.
const NEAR_CELLS: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct KernelOperator {
    mesh: Arc<Mesh>,
    matrix: DMatrix<f64>,
}

struct RowAssembler {
    aug: Vec<f64>,
    gx: Vec<f64>,
    gw: Vec<f64>,
}

#[inline]
fn f0(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.abs().ln() - t
    }
}

#[inline]
fn f1(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        0.5 * t * t * t.abs().ln() - 0.25 * t * t
    }
}

/// `(int_a^b log|x - y| (b - y)/h dy, int_a^b log|x - y| (y - a)/h dy)`.
fn log_hat_moments(x: f64, a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let ta = a - x;
    let tb = b - x;
    let i0 = f0(tb) - f0(ta);
    let i1 = f1(tb) - f1(ta) - ta * i0;
    let right = i1 / h;
    (i0 - right, right)
}

impl RowAssembler {
    fn new(mesh: &Mesh) -> Self {
        let (gx, gw) = gauss_legendre(GAUSS_POINTS);
        Self { aug: mesh.augmented(), gx, gw }
    }

    /// Weights `r` with `int_I G(x, y) f_h(y) dy = sum_j r_j f_j`.
    fn row(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        if !(x.abs() < 1.0) {
            return;
        }
        let cells = self.aug.len() - 1;
        let mut acc = vec![0.0; n + 2];
        for c in 0..cells {
            let (a, b) = (self.aug[c], self.aug[c + 1]);
            let h = b - a;
            let dist = if x < a { a - x } else if x > b { x - b } else { 0.0 };
            let (mut left, mut right) = (0.0, 0.0);
            let mid = 0.5 * (a + b);
            if dist < NEAR_CELLS * h {
                let (ll, lr) = log_hat_moments(x, a, b);
                left -= ll / PI;
                right -= lr / PI;
                for (gx, gw) in self.gx.iter().zip(&self.gw) {
                    let y = mid + 0.5 * h * gx;
                    let phi = 0.5 * (1.0 + gx);
                    let val = 0.5 * h * gw * robin_unchecked(x, y);
                    left += val * (1.0 - phi);
                    right += val * phi;
                }
            } else {
                for (gx, gw) in self.gx.iter().zip(&self.gw) {
                    let y = mid + 0.5 * h * gx;
                    let phi = 0.5 * (1.0 + gx);
                    let val = 0.5 * h * gw * green_unchecked(x, y);
                    left += val * (1.0 - phi);
                    right += val * phi;
                }
            }
            acc[c] += left;
            acc[c + 1] += right;
        }
        // constant extension on the end cells
        out.copy_from_slice(&acc[1..=n]);
        out[0] += acc[0];
        out[n - 1] += acc[n + 1];
    }
}

/// Assembles the dense Nyström matrix on `mesh`.
pub fn assemble_inverse(mesh: Arc<Mesh>) -> Result<KernelOperator> {
    let n = mesh.len();
    let asm = RowAssembler::new(&mesh);
    let mut matrix = DMatrix::<f64>::zeros(n, n);
    let mut row = vec![0.0; n];
    for (i, &x) in mesh.nodes().iter().enumerate() {
        asm.row(x, &mut row);
        for (j, v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("kernel entry ({i}, {j})")));
            }
            matrix[(i, j)] = *v;
        }
    }
    Ok(KernelOperator { mesh, matrix })
}

impl KernelOperator {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn apply_values(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: f.len() });
        }
        let v = &self.matrix * DVector::from_column_slice(f);
        Ok(v.as_slice().to_vec())
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        GridFunction::new(self.mesh.clone(), self.apply_values(f.values())?)
    }

    pub fn apply_fn<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        let vals = GridFunction::from_fn(self.mesh.clone(), f);
        self.apply(&vals).expect("same mesh")
    }

    /// Evaluates `int_I G(x, y) f_h(y) dy` at an arbitrary point (Nyström
    /// interpolation); zero outside `I`.
    pub fn evaluate_at(&self, x: f64, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::ShapeMismatch { expected: self.len(), got: f.len() });
        }
        let mut row = vec![0.0; self.len()];
        RowAssembler::new(&self.mesh).row(x, &mut row);
        Ok(row.iter().zip(f).map(|(r, v)| r * v).sum())
    }

    /// `max |w_i K_ij - w_j K_ji| / max |w_i K_ij|`, which vanishes for an
    /// exactly symmetric bilinear form.
    pub fn symmetry_defect(&self) -> f64 {
        let w = self.mesh.weights();
        let n = self.len();
        let mut scale: f64 = 0.0;
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = w[i] * self.matrix[(i, j)];
                let b = w[j] * self.matrix[(j, i)];
                scale = scale.max(a.abs());
                defect = defect.max((a - b).abs());
            }
        }
        defect / scale
    }
}
