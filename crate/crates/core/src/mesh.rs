//! Graded meshes on `I` and grid functions living on them.
//!
//! The base mesh is uniform in `s` under the endpoint map
//! `x = sign(s) (1 - (1 - |s|)^q)`, which clusters nodes like `d^(1 - 1/q)`
//! near `x = +-1`. Around each concentration point the spacing is capped at
//! `delta / 16` on a window of half-width `20 delta` and then allowed to grow
//! linearly until it meets the base spacing. Nodes are placed by
//! equidistributing the reciprocal of the spacing demand.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bubbles::{delta_choice, Configuration};
use crate::error::{Error, Result};

/// Hard cap on the number of mesh nodes.
pub const MAX_NODES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Endpoint clustering exponent `q >= 1`.
    pub grading: f64,
    /// Patch spacing as a multiple of delta.
    pub spacing: f64,
    /// Patch window half-width as a multiple of delta.
    pub window: f64,
    /// Growth rate of the spacing outside the window.
    pub growth: f64,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { grading: 2.0, spacing: 1.0 / 16.0, window: 20.0, growth: 0.1 }
    }
}

/// A refinement patch around a concentration point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    pub center: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    patches: Vec<Patch>,
    grading: f64,
    base_n: usize,
}

struct Demand<'a> {
    patches: &'a [Patch],
    opts: MeshOptions,
    base_ds: f64,
}

impl Demand<'_> {
    fn map(&self, s: f64) -> f64 {
        s.signum() * (1.0 - (1.0 - s.abs()).powf(self.opts.grading))
    }

    fn map_inv(&self, x: f64) -> f64 {
        x.signum() * (1.0 - (1.0 - x.abs()).powf(1.0 / self.opts.grading))
    }

    fn map_dx(&self, s: f64) -> f64 {
        self.opts.grading * (1.0 - s.abs()).powf(self.opts.grading - 1.0)
    }

    /// Spacing demanded by the patches at `x`, in x-units.
    fn patch_spacing(&self, x: f64) -> f64 {
        let o = &self.opts;
        // keep a small margin below the nominal cap
        let c = 0.98 * o.spacing;
        self.patches
            .iter()
            .map(|p| {
                let reach = (o.window + o.spacing) * p.delta;
                let dist = (x - p.center).abs();
                c * p.delta + o.growth * (dist - reach).max(0.0)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Reciprocal spacing demand in s-units.
    fn density(&self, s: f64) -> f64 {
        let x = self.map(s);
        let ds_patch = self.patch_spacing(x) / self.map_dx(s).max(1e-300);
        1.0 / self.base_ds.min(ds_patch)
    }

    /// Points in x around each patch, fine enough to resolve the demand.
    fn patch_samples(&self, out: &mut Vec<f64>) {
        for p in self.patches {
            let base_h = self.base_ds * self.opts.grading;
            for dir in [-1.0, 1.0] {
                let mut x = p.center;
                loop {
                    let h = self.patch_spacing(x) / 8.0;
                    if h >= base_h {
                        break;
                    }
                    x += dir * h;
                    if x.abs() >= 1.0 {
                        break;
                    }
                    out.push(self.map_inv(x));
                }
            }
            if p.center.abs() < 1.0 {
                out.push(self.map_inv(p.center));
            }
        }
    }
}

impl Mesh {
    /// Mesh with the given refinement patches.
    pub fn with_patches(patches: &[Patch], base_n: usize, opts: MeshOptions) -> Result<Self> {
        if base_n < 2 {
            return Err(Error::InvalidParameter(format!("base_n must be at least 2, got {base_n}")));
        }
        if !(opts.grading >= 1.0) || !(opts.spacing > 0.0) || !(opts.window > 0.0) || !(opts.growth > 0.0) {
            return Err(Error::InvalidParameter(format!("bad mesh options {opts:?}")));
        }
        for p in patches {
            if !(p.delta > 0.0) || !(p.center.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("bad patch {p:?}")));
            }
            // spacing below ~1e3 ulps of the center cannot be represented
            if opts.spacing * p.delta < 1e3 * f64::EPSILON {
                return Err(Error::MeshTooLarge { needed: usize::MAX, limit: MAX_NODES });
            }
        }
        let demand = Demand { patches, opts, base_ds: 2.0 / base_n as f64 };

        // fine grid in s: 16 points per base cell plus patch samples
        let mut fine: Vec<f64> = (0..=16 * base_n)
            .map(|j| -1.0 + 2.0 * j as f64 / (16 * base_n) as f64)
            .collect();
        demand.patch_samples(&mut fine);
        fine.sort_by(f64::total_cmp);
        fine.dedup();

        let dens: Vec<f64> = fine.iter().map(|&s| demand.density(s)).collect();
        let mut cumulative = Vec::with_capacity(fine.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for j in 1..fine.len() {
            acc += 0.5 * (dens[j] + dens[j - 1]) * (fine[j] - fine[j - 1]);
            cumulative.push(acc);
        }
        let total = acc;
        let cells = (total - 1e-9).ceil().max(2.0) as usize;
        let limit = MAX_NODES.min(40 * base_n);
        if cells - 1 > limit {
            return Err(Error::MeshTooLarge { needed: cells - 1, limit });
        }

        let mut nodes = Vec::with_capacity(cells - 1);
        let mut seg = 0;
        for j in 1..cells {
            let target = total * j as f64 / cells as f64;
            while cumulative[seg + 1] < target {
                seg += 1;
            }
            let (c0, c1) = (cumulative[seg], cumulative[seg + 1]);
            let t = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
            let s = fine[seg] + t * (fine[seg + 1] - fine[seg]);
            nodes.push(demand.map(s));
        }
        // a reflection-invariant patch set gets an exactly reflection-invariant mesh
        let reflected = |p: &Patch| patches.iter().any(|q| q.center == -p.center && q.delta == p.delta);
        if patches.iter().all(reflected) {
            let n = nodes.len();
            for i in 0..n / 2 {
                let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
                nodes[i] = -x;
                nodes[n - 1 - i] = x;
            }
            if n % 2 == 1 {
                nodes[n / 2] = 0.0;
            }
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !(x.abs() < 1.0)) {
            return Err(Error::NonFinite("mesh nodes are not strictly increasing".into()));
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self { nodes, weights, patches: patches.to_vec(), grading: opts.grading, base_n })
    }

    /// Pure endpoint-graded mesh.
    pub fn graded(base_n: usize) -> Result<Self> {
        Self::with_patches(&[], base_n, MeshOptions::default())
    }

    /// Mesh on explicitly given interior nodes, e.g. read back from a profile.
    /// Carries no patches; `base_n` is reported as zero.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {}", nodes.len())));
        }
        if nodes.iter().any(|x| !(x.abs() < 1.0)) {
            return Err(Error::InvalidParameter("mesh nodes must lie in (-1, 1)".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("mesh nodes must be strictly increasing".into()));
        }
        if nodes.len() > MAX_NODES {
            return Err(Error::MeshTooLarge { needed: nodes.len(), limit: MAX_NODES });
        }
        let weights = trapezoid_weights(&nodes);
        Ok(Self { nodes, weights, patches: Vec::new(), grading: 1.0, base_n: 0 })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch_centers(&self) -> Vec<f64> {
        self.patches.iter().map(|p| p.center).collect()
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn base_n(&self) -> usize {
        self.base_n
    }

    /// Nodes with the endpoints `-1` and `1` prepended and appended.
    pub fn augmented(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.nodes.len() + 2);
        v.push(-1.0);
        v.extend_from_slice(&self.nodes);
        v.push(1.0);
        v
    }

    /// Largest gap between consecutive nodes of the augmented mesh inside `[a, b]`.
    pub fn max_spacing_in(&self, a: f64, b: f64) -> f64 {
        self.augmented()
            .windows(2)
            .filter(|w| w[1] > a && w[0] < b)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.nodes.len();
        (0..n).all(|i| (self.nodes[i] + self.nodes[n - 1 - i]).abs() <= tol)
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { -1.0 } else { nodes[i - 1] };
            let right = if i + 1 == n { 1.0 } else { nodes[i + 1] };
            0.5 * (right - left)
        })
        .collect()
}

/// Mesh refined around the points of `cfg` at the scales chosen for `lambda`.
pub fn build_mesh(cfg: &Configuration, lambda: f64, base_n: usize) -> Result<Mesh> {
    build_mesh_with(cfg, lambda, base_n, MeshOptions::default())
}

pub fn build_mesh_with(cfg: &Configuration, lambda: f64, base_n: usize, opts: MeshOptions) -> Result<Mesh> {
    if base_n < 64 {
        return Err(Error::InvalidParameter(format!("base_n must be at least 64, got {base_n}")));
    }
    let deltas = delta_choice(cfg, lambda)?;
    let patches: Vec<Patch> = cfg
        .xis()
        .iter()
        .zip(deltas)
        .map(|(&center, delta)| Patch { center, delta })
        .collect();
    Mesh::with_patches(&patches, base_n, opts)
}

/// Samples of a function on a mesh, extended by zero outside `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::ShapeMismatch { expected: mesh.len(), got: values.len() });
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn<F: FnMut(f64) -> f64>(mesh: Arc<Mesh>, f: F) -> Self {
        let values = mesh.nodes().iter().copied().map(f).collect();
        Self { mesh, values }
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.len();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self { mesh: self.mesh.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Piecewise-linear interpolant, zero at and beyond `+-1`.
    pub fn eval(&self, x: f64) -> f64 {
        if !(x.abs() < 1.0) {
            return 0.0;
        }
        let nodes = self.mesh.nodes();
        let n = nodes.len();
        let j = nodes.partition_point(|&y| y <= x);
        let (x0, v0) = if j == 0 { (-1.0, 0.0) } else { (nodes[j - 1], self.values[j - 1]) };
        let (x1, v1) = if j == n { (1.0, 0.0) } else { (nodes[j], self.values[j]) };
        if x1 == x0 {
            return v0;
        }
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Transfers the piecewise-linear interpolant onto another mesh.
    pub fn transfer(&self, mesh: Arc<Mesh>) -> Self {
        let values = mesh.nodes().iter().map(|&x| self.eval(x)).collect();
        Self { mesh, values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Discrete `L^p(I)` norm with the trapezoid node weights.
    pub fn lp_norm(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(self.mesh.weights())
            .map(|(v, w)| w * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().zip(self.mesh.weights()).map(|(v, w)| v * w).sum()
    }

    /// `int_I f g dx` with the node weights.
    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.mesh.weights())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::ShapeMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }
}
