//! Python bindings: closed-form kernels, the reduced energy, the solver and
//! the nodal verification.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use sinhpoisson::bubbles::{self, BubbleParams};
use sinhpoisson::kernel::assemble_inverse;
use sinhpoisson::mesh::{GridFunction, Mesh};
use sinhpoisson::pipeline::{analyze_step, format_signs, parse_signs, StepAnalysis};
use sinhpoisson::reduced::{self, EnergyReport};
use sinhpoisson::solver::{self, ContinuationOptions, NewtonOptions};
use sinhpoisson::verify;
use sinhpoisson::Error;

create_exception!(sinhpoisson_py, SolverError, PyException, "Solver or verification failure.");

fn to_py(e: Error) -> PyErr {
    match e {
        Error::SingularPoint(_)
        | Error::OutOfDomain(_)
        | Error::InvalidParameter(_)
        | Error::InvalidConfiguration(_)
        | Error::ShapeMismatch { .. }
        | Error::MeshTooLarge { .. } => PyValueError::new_err(e.to_string()),
        _ => SolverError::new_err(e.to_string()),
    }
}

/// Ordered points with one sign per peak.
#[pyclass(name = "Configuration", frozen, from_py_object)]
#[derive(Clone)]
struct PyConfiguration {
    inner: bubbles::Configuration,
}

#[pymethods]
impl PyConfiguration {
    /// `signs` is a pattern such as `"+-+"`, a list of +-1, or `None` for
    /// alternating signs starting with `+`.
    #[new]
    #[pyo3(signature = (xis, signs=None))]
    fn new(xis: Vec<f64>, signs: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let k = xis.len();
        let signs = match signs {
            None => bubbles::alternating_signs(k),
            Some(s) => match s.extract::<String>() {
                Ok(p) => parse_signs(&p, k).map_err(to_py)?,
                Err(_) => s.extract::<Vec<i8>>()?,
            },
        };
        Ok(Self { inner: bubbles::Configuration::new(xis, signs).map_err(to_py)? })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn xis(&self) -> Vec<f64> {
        self.inner.xis().to_vec()
    }

    #[getter]
    fn signs(&self) -> Vec<i8> {
        self.inner.signs().to_vec()
    }

    fn reflected(&self) -> Self {
        Self { inner: self.inner.reflected() }
    }

    fn negated(&self) -> Self {
        Self { inner: self.inner.negated() }
    }

    fn __repr__(&self) -> String {
        format!("Configuration({:?}, {:?})", self.inner.xis(), format_signs(self.inner.signs()))
    }
}

/// Critical point of the reduced energy.
#[pyclass(name = "CriticalPoint", frozen, get_all)]
struct PyCriticalPoint {
    config: PyConfiguration,
    xi: Vec<f64>,
    value: f64,
    grad_norm: f64,
    hessian_eigs: Vec<f64>,
    classification: String,
}

impl From<EnergyReport> for PyCriticalPoint {
    fn from(r: EnergyReport) -> Self {
        Self {
            xi: r.config.xis().to_vec(),
            config: PyConfiguration { inner: r.config },
            value: r.value,
            grad_norm: r.grad_norm,
            hessian_eigs: r.hessian_eigs,
            classification: r.classification.as_str().to_string(),
        }
    }
}

/// One peak of a converged solution.
#[pyclass(name = "Peak", frozen, get_all)]
struct PyPeak {
    location: f64,
    height: f64,
    sign: i8,
    local_mass: f64,
    height_gap: f64,
    mass_error: f64,
}

/// A converged solution with its diagnostics.
#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    lam: f64,
    x: Vec<f64>,
    u: Vec<f64>,
    residual_sup: f64,
    newton_iters: usize,
    nodal_count: Option<usize>,
    zeros: Vec<f64>,
    peaks: Vec<Py<PyPeak>>,
    energy: f64,
    points: Vec<f64>,
    remainder_sup: Option<f64>,
    sigma_full: Option<f64>,
    sigma_perp: Option<f64>,
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(lam={}, nodes={}, residual_sup={:e}, nodal_count={})",
            self.lam,
            self.x.len(),
            self.residual_sup,
            self.nodal_count.map_or("None".to_string(), |c| c.to_string())
        )
    }
}

fn solution(py: Python<'_>, u: &GridFunction, a: StepAnalysis) -> PyResult<PySolution> {
    let peaks = match &a.peaks {
        Ok(p) => p
            .peaks
            .iter()
            .map(|p| {
                Py::new(
                    py,
                    PyPeak {
                        location: p.location,
                        height: p.sign as f64 * p.height,
                        sign: p.sign,
                        local_mass: p.local_mass,
                        height_gap: p.height_gap,
                        mass_error: p.mass_error,
                    },
                )
            })
            .collect::<PyResult<Vec<_>>>()?,
        Err(_) => Vec::new(),
    };
    Ok(PySolution {
        lam: a.lambda,
        x: u.mesh().nodes().to_vec(),
        u: u.values().to_vec(),
        residual_sup: a.residual_sup,
        newton_iters: a.newton_iters,
        nodal_count: a.nodal_count(),
        zeros: a.nodal.as_ref().map(|n| n.zero_locations.clone()).unwrap_or_default(),
        peaks,
        energy: a.energy,
        points: a.points,
        remainder_sup: a.remainder_sup,
        sigma_full: a.sigma_full,
        sigma_perp: a.sigma_perp,
    })
}

fn options(base_n: usize, tol: f64) -> ContinuationOptions {
    ContinuationOptions { base_n, newton: NewtonOptions { tol, ..Default::default() }, ..Default::default() }
}

fn params(delta: f64, xi: f64) -> PyResult<BubbleParams> {
    BubbleParams::new(delta, xi).map_err(to_py)
}

fn grid(x: Vec<f64>, u: Vec<f64>) -> PyResult<GridFunction> {
    let mesh = Arc::new(Mesh::from_nodes(x).map_err(to_py)?);
    GridFunction::new(mesh, u).map_err(to_py)
}

/// Green function `G(xi, x)` of the half Laplacian on (-1, 1).
#[pyfunction]
fn green(xi: f64, x: f64) -> PyResult<f64> {
    sinhpoisson::green::green(xi, x).map_err(to_py)
}

/// Regular part `H(xi, x)` of the Green function.
#[pyfunction]
fn robin(xi: f64, x: f64) -> PyResult<f64> {
    sinhpoisson::green::robin(xi, x).map_err(to_py)
}

#[pyfunction]
fn green_dx(xi: f64, x: f64) -> PyResult<f64> {
    sinhpoisson::green::green_dx(xi, x).map_err(to_py)
}

#[pyfunction]
fn robin_dxi(xi: f64, x: f64) -> PyResult<f64> {
    sinhpoisson::green::robin_dxi(xi, x).map_err(to_py)
}

#[pyfunction]
fn bubble(delta: f64, xi: f64, x: f64) -> PyResult<f64> {
    bubbles::bubble(params(delta, xi)?, x).map_err(to_py)
}

#[pyfunction]
fn proj_bubble(delta: f64, xi: f64, x: f64) -> PyResult<f64> {
    bubbles::proj_bubble(params(delta, xi)?, x).map_err(to_py)
}

#[pyfunction]
fn proj_z1(delta: f64, xi: f64, x: f64) -> PyResult<f64> {
    bubbles::proj_z1(params(delta, xi)?, x).map_err(to_py)
}

/// Concentration scales of the ansatz at `lam`.
#[pyfunction]
fn delta_choice(config: &PyConfiguration, lam: f64) -> PyResult<Vec<f64>> {
    bubbles::delta_choice(&config.inner, lam).map_err(to_py)
}

#[pyfunction]
fn reduced_value(config: &PyConfiguration) -> f64 {
    reduced::reduced_value(&config.inner)
}

#[pyfunction]
fn reduced_grad(config: &PyConfiguration) -> Vec<f64> {
    reduced::reduced_grad(&config.inner)
}

/// Maximizes the reduced energy; `None` when every start runs into the
/// boundary.
#[pyfunction]
#[pyo3(signature = (k, signs="alternating", starts=16, tol=1e-12, seed=0))]
fn maximize(k: usize, signs: &str, starts: usize, tol: f64, seed: u64) -> PyResult<Option<PyCriticalPoint>> {
    let signs = parse_signs(signs, k).map_err(to_py)?;
    match reduced::maximize_seeded(k, &signs, starts, tol, seed) {
        Ok(r) => Ok(Some(r.into())),
        Err(Error::NoCriticalPoint) => Ok(None),
        Err(e) => Err(to_py(e)),
    }
}

/// Solves at a single `lam` starting from the ansatz at `config`.
#[pyfunction]
#[pyo3(signature = (config, lam, base_n=256, tol=1e-10, sigma=false))]
fn solve(
    py: Python<'_>,
    config: &PyConfiguration,
    lam: f64,
    base_n: usize,
    tol: f64,
    sigma: bool,
) -> PyResult<PySolution> {
    let cfg = &config.inner;
    let step = solver::solve_at(cfg, lam, None, None, options(base_n, tol)).map_err(to_py)?;
    let a = analyze_step(&step, cfg, sigma).map_err(to_py)?;
    solution(py, &step.report.solution, a)
}

/// Geometric sweep `lam_start, lam_start * factor, ...` down to `lam_end`.
/// Returns the converged solutions and, if the sweep stopped early, a
/// message naming the failed `lam`.
#[pyfunction]
#[pyo3(signature = (config, lam_start, lam_end, factor=0.5, base_n=256, tol=1e-10, sigma=false))]
#[allow(clippy::too_many_arguments)]
fn continuation(
    py: Python<'_>,
    config: &PyConfiguration,
    lam_start: f64,
    lam_end: f64,
    factor: f64,
    base_n: usize,
    tol: f64,
    sigma: bool,
) -> PyResult<(Vec<PySolution>, Option<String>)> {
    let cfg = &config.inner;
    let out = solver::continuation(cfg, lam_start, lam_end, factor, options(base_n, tol)).map_err(to_py)?;
    let mut sols = Vec::with_capacity(out.steps.len());
    for s in &out.steps {
        let a = analyze_step(s, cfg, sigma).map_err(to_py)?;
        sols.push(solution(py, &s.report.solution, a)?);
    }
    let failure = out.failure.map(|(l, e)| format!("lambda = {l}: {e}"));
    Ok((sols, failure))
}

/// `sup |u - K f_lam(u)|` with the operator reassembled on the nodes `x`.
#[pyfunction]
fn residual_sup(x: Vec<f64>, u: Vec<f64>, lam: f64) -> PyResult<f64> {
    let u = grid(x, u)?;
    let op = assemble_inverse(u.mesh().clone()).map_err(to_py)?;
    Ok(solver::residual(&op, &u, lam).map_err(to_py)?.sup_norm())
}

/// Certified nodal count of the profile `(x, u)`: returns the count, the
/// zero locations and the counting method (`"certified"` or `"raw"`).
#[pyfunction]
fn count_nodal_regions(x: Vec<f64>, u: Vec<f64>, config: &PyConfiguration, lam: f64) -> PyResult<(usize, Vec<f64>, String)> {
    let u = grid(x, u)?;
    let r = verify::count_nodal_regions(&u, &config.inner, lam).map_err(to_py)?;
    let method = match r.method {
        verify::CountMethod::Certified => "certified",
        verify::CountMethod::Raw => "raw",
    };
    Ok((r.nodal_count, r.zero_locations, method.to_string()))
}

#[pymodule]
fn sinhpoisson_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<PyConfiguration>()?;
    m.add_class::<PyCriticalPoint>()?;
    m.add_class::<PyPeak>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(green, m)?)?;
    m.add_function(wrap_pyfunction!(robin, m)?)?;
    m.add_function(wrap_pyfunction!(green_dx, m)?)?;
    m.add_function(wrap_pyfunction!(robin_dxi, m)?)?;
    m.add_function(wrap_pyfunction!(bubble, m)?)?;
    m.add_function(wrap_pyfunction!(proj_bubble, m)?)?;
    m.add_function(wrap_pyfunction!(proj_z1, m)?)?;
    m.add_function(wrap_pyfunction!(delta_choice, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_value, m)?)?;
    m.add_function(wrap_pyfunction!(reduced_grad, m)?)?;
    m.add_function(wrap_pyfunction!(maximize, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(continuation, m)?)?;
    m.add_function(wrap_pyfunction!(residual_sup, m)?)?;
    m.add_function(wrap_pyfunction!(count_nodal_regions, m)?)?;
    Ok(())
}
