//! Fixed-point form `u = K f_lambda(u)` of the equation, damped Newton,
//! lambda-continuation, energies and the linearized operator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bubbles::{AnsatzSpec, BubbleParams, Configuration};
use crate::error::{Error, Result};
use crate::kernel::{assemble_inverse, KernelOperator};
use crate::linalg::solve_dense;
use crate::mesh::{build_mesh, GridFunction, Mesh};

/// Pointwise bound on `|u|` before the exponentials are formed.
pub const OVERFLOW_GUARD: f64 = 700.0;

/// Smallest Newton step length tried by the backtracking line search.
pub const MIN_STEP: f64 = 1.0 / (1 << 20) as f64;

#[inline]
pub fn f_lambda(t: f64, lambda: f64) -> f64 {
    2.0 * lambda * t.sinh()
}

#[inline]
pub fn f_lambda_prime(t: f64, lambda: f64) -> f64 {
    2.0 * lambda * t.cosh()
}

/// Primitive of `f_lambda` vanishing at zero.
#[inline]
pub fn g_lambda(t: f64, lambda: f64) -> f64 {
    // e^t + e^-t - 2 = 4 sinh^2(t/2)
    let s = (0.5 * t).sinh();
    4.0 * lambda * s * s
}

fn guard(values: &[f64]) -> Result<()> {
    for &v in values {
        if !(v.abs() <= OVERFLOW_GUARD) {
            return Err(Error::Overflow(v));
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn same_mesh(op: &KernelOperator, u: &GridFunction) -> Result<()> {
    if u.values().len() != op.len() {
        return Err(Error::ShapeMismatch { expected: op.len(), got: u.values().len() });
    }
    Ok(())
}

fn residual_values(op: &KernelOperator, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
    guard(u)?;
    let f: Vec<f64> = u.iter().map(|&t| f_lambda(t, lambda)).collect();
    let kf = op.apply_values(&f)?;
    Ok(u.iter().zip(kf).map(|(a, b)| a - b).collect())
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `u - K f_lambda(u)`.
pub fn residual(op: &KernelOperator, u: &GridFunction, lambda: f64) -> Result<GridFunction> {
    same_mesh(op, u)?;
    GridFunction::new(op.mesh().clone(), residual_values(op, u.values(), lambda)?)
}

/// Ansatz sampled at the mesh nodes.
pub fn ansatz_grid(spec: &AnsatzSpec, mesh: Arc<Mesh>) -> GridFunction {
    GridFunction::from_fn(mesh, |x| spec.value_unchecked(x))
}

/// `sum_i a_i exp(U_i)` sampled at the mesh nodes.
pub fn ansatz_source_grid(spec: &AnsatzSpec, mesh: Arc<Mesh>) -> GridFunction {
    GridFunction::from_fn(mesh, |x| spec.source(x))
}

/// Default base resolution for the stand-alone diagnostics.
pub const DEFAULT_BASE_N: usize = 256;

/// Discrete `L^p(I)` norm of `E = f_lambda(omega) - sum_i a_i exp(U_i)`.
pub fn ansatz_error_norm(cfg: &Configuration, lambda: f64, p: f64) -> Result<f64> {
    let mesh = Arc::new(build_mesh(cfg, lambda, DEFAULT_BASE_N)?);
    ansatz_error_norm_on(cfg, lambda, p, mesh)
}

pub fn ansatz_error_norm_on(cfg: &Configuration, lambda: f64, p: f64, mesh: Arc<Mesh>) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
    }
    let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
    let omega = ansatz_grid(&spec, mesh.clone());
    guard(omega.values())?;
    let e = GridFunction::from_fn(mesh, |x| f_lambda(spec.value_unchecked(x), lambda) - spec.source(x));
    Ok(e.lp_norm(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Give up early when the residual has not halved over this many
    /// iterations; 0 disables the check.
    pub stall_window: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, stall_window: 10 }
    }
}

/// Diagnostics attached to a converged solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub nodal_count: Option<usize>,
    pub peak_locations: Vec<f64>,
    pub peak_heights: Vec<f64>,
    pub local_masses: Vec<f64>,
    pub energy: Option<f64>,
    /// `sup |u - omega|` on the nodes.
    pub remainder_sup: Option<f64>,
    pub sigma_perp: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub lambda: f64,
    pub solution: GridFunction,
    pub newton_iters: usize,
    pub residual_sup: f64,
    pub residual_history: Vec<f64>,
    pub diagnostics: Diagnostics,
}

/// Damped Newton on `F(u) = u - K f_lambda(u)` with Jacobian
/// `I - K diag(f_lambda'(u))`. Steps are halved until the sup-residual
/// strictly decreases.
pub fn newton_solve(
    op: &KernelOperator,
    u0: &GridFunction,
    lambda: f64,
    opts: NewtonOptions,
) -> Result<SolveReport> {
    check_lambda(lambda)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {}", opts.tol)));
    }
    same_mesh(op, u0)?;
    let n = op.len();
    let mut u = u0.values().to_vec();
    let mut res = residual_values(op, &u, lambda)?;
    let mut res_sup = sup(&res);
    let mut history = vec![res_sup];
    let mut iters = 0;
    while res_sup > opts.tol {
        let w = opts.stall_window;
        let stalled = w > 0 && history.len() > w && history[history.len() - 1] > 0.5 * history[history.len() - 1 - w];
        if iters == opts.max_iter || stalled {
            return Err(Error::NonConvergence { max_iter: opts.max_iter, history });
        }
        iters += 1;
        let mut jac = -op.matrix().clone();
        for (j, &t) in u.iter().enumerate() {
            let d = f_lambda_prime(t, lambda);
            jac.column_mut(j).scale_mut(d);
        }
        for i in 0..n {
            jac[(i, i)] += 1.0;
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|r| -r));
        let step = solve_dense(&jac, &rhs).ok_or(Error::SingularJacobian)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok(r) = residual_values(op, &trial, lambda) {
                let s = sup(&r);
                if s < res_sup {
                    u = trial;
                    res = r;
                    res_sup = s;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::NonConvergence { max_iter: opts.max_iter, history });
            }
        }
        history.push(res_sup);
    }
    Ok(SolveReport {
        lambda,
        solution: GridFunction::new(op.mesh().clone(), u)?,
        newton_iters: iters,
        residual_sup: res_sup,
        residual_history: history,
        diagnostics: Diagnostics::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub base_n: usize,
    pub newton: NewtonOptions,
    /// Weight of the fresh ansatz in the seed; the rest comes from the
    /// previous solution transported to the new mesh.
    pub blend: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self { base_n: DEFAULT_BASE_N, newton: NewtonOptions::default(), blend: 0.5 }
    }
}

/// One converged continuation step with the objects needed to analyse it.
#[derive(Debug, Clone)]
pub struct ContinuationStep {
    pub report: SolveReport,
    pub operator: Arc<KernelOperator>,
    /// Ansatz at the limiting points of the configuration.
    pub ansatz: AnsatzSpec,
    /// Points for which the solution minus the ansatz is energy-orthogonal
    /// to the translation modes.
    pub points: Configuration,
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub steps: Vec<ContinuationStep>,
    /// Set when the sweep stopped early: the lambda that failed and why.
    pub failure: Option<(f64, Error)>,
}

impl ContinuationOutcome {
    pub fn reports(&self) -> impl Iterator<Item = &SolveReport> {
        self.steps.iter().map(|s| &s.report)
    }

    pub fn last_lambda(&self) -> Option<f64> {
        self.steps.last().map(|s| s.report.lambda)
    }
}

/// `lambda_start, lambda_start * factor, ...` down to the first value
/// `<= lambda_end`.
pub fn lambda_schedule(lambda_start: f64, lambda_end: f64, factor: f64) -> Result<Vec<f64>> {
    if !(lambda_end > 0.0) || !(lambda_start >= lambda_end) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < lambda_end <= lambda_start, got {lambda_start}:{lambda_end}"
        )));
    }
    if !(factor > 0.0 && factor < 1.0) {
        return Err(Error::InvalidParameter(format!("factor must lie in (0, 1), got {factor}")));
    }
    let mut out = vec![lambda_start];
    let mut l = lambda_start;
    while l > lambda_end * (1.0 + 1e-9) {
        l *= factor;
        out.push(l);
    }
    Ok(out)
}

/// Solution of the projected problem at fixed points `xi`:
/// `u - K f_lambda(u) = sum_j c_j PZ_{1,j}` with `u - omega` energy-orthogonal
/// to every `PZ_{1,j}`.
#[derive(Debug, Clone)]
pub struct ProjectedSolution {
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub multipliers: Vec<f64>,
}

fn projected_newton(
    op: &KernelOperator,
    spec: &AnsatzSpec,
    u0: &[f64],
    c0: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mesh = op.mesh();
    let n = op.len();
    let k = spec.config.k();
    let lambda = spec.lambda;
    let w = mesh.weights();
    let omega: Vec<f64> = mesh.nodes().iter().map(|&x| spec.value_unchecked(x)).collect();
    // densities e^{U_j} Z_{1,j}, their images PZ_{1,j} and the weighted test rows
    let modes: Vec<Vec<f64>> = spec
        .bubbles()
        .map(|p| mesh.nodes().iter().map(|&x| p.exp_bubble(x) * p.z1(x)).collect())
        .collect();
    let images: Vec<Vec<f64>> = modes.iter().map(|m| op.apply_values(m)).collect::<Result<_>>()?;
    let tests: Vec<Vec<f64>> = modes.iter().map(|m| m.iter().zip(w).map(|(a, b)| a * b).collect()).collect();
    // constraint rows are scaled to be comparable with the residual rows
    let scale: Vec<f64> = tests.iter().map(|t| 1.0 / t.iter().map(|v| v.abs()).sum::<f64>().max(1e-300)).collect();

    let eval = |u: &[f64], c: &[f64]| -> Result<Vec<f64>> {
        let mut r = residual_values(op, u, lambda)?;
        for (cj, img) in c.iter().zip(&images) {
            for (ri, v) in r.iter_mut().zip(img) {
                *ri -= cj * v;
            }
        }
        for (j, t) in tests.iter().enumerate() {
            let s: f64 = t.iter().zip(u.iter().zip(&omega)).map(|(t, (a, b))| t * (a - b)).sum();
            r.push(s * scale[j]);
        }
        Ok(r)
    };
    let mut u = u0.to_vec();
    let mut c = c0.to_vec();
    let mut r = eval(&u, &c)?;
    let mut rs = sup(&r);
    for _ in 0..60 {
        if rs <= tol {
            return Ok((u, c));
        }
        let mut jac = DMatrix::<f64>::zeros(n + k, n + k);
        jac.view_mut((0, 0), (n, n)).copy_from(&(-op.matrix()));
        for (j, &t) in u.iter().enumerate() {
            let d = f_lambda_prime(t, lambda);
            jac.view_mut((0, j), (n, 1)).scale_mut(d);
            jac[(j, j)] += 1.0;
        }
        for m in 0..k {
            for i in 0..n {
                jac[(i, n + m)] = -images[m][i];
                jac[(n + m, i)] = tests[m][i] * scale[m];
            }
        }
        let rhs = DVector::from_iterator(n + k, r.iter().map(|v| -v));
        let step = solve_dense(&jac, &rhs).ok_or(Error::SingularJacobian)?;
        let mut alpha = 1.0;
        loop {
            let tu: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let tc: Vec<f64> = c.iter().zip(step.iter().skip(n)).map(|(a, s)| a + alpha * s).collect();
            if let Ok(tr) = eval(&tu, &tc) {
                let ts = sup(&tr);
                if ts < rs {
                    u = tu;
                    c = tc;
                    r = tr;
                    rs = ts;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::NonConvergence { max_iter: 60, history: vec![rs] });
            }
        }
    }
    if rs <= tol {
        Ok((u, c))
    } else {
        Err(Error::NonConvergence { max_iter: 60, history: vec![rs] })
    }
}

/// Finite-dimensional reduction on a fixed mesh: solves the projected
/// problem for given points and moves the points by Newton on the
/// multipliers until they vanish. The result solves the full equation.
pub fn reduction_solve(op: &KernelOperator, cfg: &Configuration, lambda: f64, tol: f64) -> Result<ProjectedSolution> {
    check_lambda(lambda)?;
    let k = cfg.k();
    let mesh = op.mesh();
    let inner_tol = 1e-12;
    let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
    let omega: Vec<f64> = mesh.nodes().iter().map(|&x| spec.value_unchecked(x)).collect();
    let (mut u, mut c) = projected_newton(op, &spec, &omega, &vec![0.0; k], inner_tol)?;
    let mut xi = cfg.xis().to_vec();
    let cnorm = |c: &[f64]| sup(c);
    for _ in 0..40 {
        if cnorm(&c) <= tol {
            return Ok(ProjectedSolution { xi, u, multipliers: c });
        }
        let h = 1e-6;
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for m in 0..k {
            let mut p = xi.clone();
            p[m] += h;
            let s = AnsatzSpec::new(cfg.with_points(p)?, lambda)?;
            let (_, cp) = projected_newton(op, &s, &u, &c, inner_tol)?;
            for i in 0..k {
                jac[(i, m)] = (cp[i] - c[i]) / h;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_iterator(k, c.iter().map(|v| -v)))
            .ok_or(Error::SingularJacobian)?;
        let mut alpha = 1.0;
        loop {
            let p: Vec<f64> = xi.iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            let attempt = cfg
                .with_points(p.clone())
                .and_then(|t| AnsatzSpec::new(t, lambda))
                .and_then(|s| projected_newton(op, &s, &u, &c, inner_tol));
            if let Ok((tu, tc)) = attempt {
                if cnorm(&tc) < cnorm(&c) {
                    xi = p;
                    u = tu;
                    c = tc;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-4 {
                return Err(Error::NonConvergence { max_iter: 40, history: vec![cnorm(&c)] });
            }
        }
    }
    Err(Error::NonConvergence { max_iter: 40, history: vec![cnorm(&c)] })
}

/// Points `xi` near `guess` for which `u - omega_xi` is energy-orthogonal to
/// every `PZ_{1,j}`, together with that difference.
pub fn orthogonal_decomposition(
    u: &GridFunction,
    guess: &Configuration,
    lambda: f64,
) -> Result<(Configuration, GridFunction)> {
    check_lambda(lambda)?;
    let k = guess.k();
    let mesh = u.mesh().clone();
    let w = mesh.weights();
    let conditions = |cfg: &Configuration| -> Result<Vec<f64>> {
        let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
        Ok(spec
            .bubbles()
            .map(|p| {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for ((&x, &v), &wi) in mesh.nodes().iter().zip(u.values()).zip(w) {
                    let m = p.exp_bubble(x) * p.z1(x) * wi;
                    acc += m * (v - spec.value_unchecked(x));
                    norm += m.abs();
                }
                acc / norm.max(1e-300)
            })
            .collect())
    };
    let mut cfg = guess.clone();
    let mut e = conditions(&cfg)?;
    for _ in 0..50 {
        if sup(&e) <= 1e-13 {
            break;
        }
        let h = 1e-7;
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for m in 0..k {
            let mut p = cfg.xis().to_vec();
            p[m] += h;
            let ep = conditions(&cfg.with_points(p)?)?;
            for i in 0..k {
                jac[(i, m)] = (ep[i] - e[i]) / h;
            }
        }
        let step = jac
            .lu()
            .solve(&DVector::from_iterator(k, e.iter().map(|v| -v)))
            .ok_or(Error::SingularJacobian)?;
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-6 {
            let p: Vec<f64> = cfg.xis().iter().zip(step.iter()).map(|(a, s)| a + alpha * s).collect();
            if let Ok(c) = cfg.with_points(p) {
                let ec = conditions(&c)?;
                if sup(&ec) < sup(&e) {
                    cfg = c;
                    e = ec;
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
    if !(sup(&e) <= 1e-8) {
        return Err(Error::NonConvergence { max_iter: 50, history: vec![sup(&e)] });
    }
    let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
    let phi = u.sub(&ansatz_grid(&spec, mesh))?;
    Ok((cfg, phi))
}

/// Solves at a single lambda. Newton is tried first from the ansatz (blended
/// with `seed` when given); if it fails, the reduction started from `points`
/// (default: the points of `cfg`) supplies the initial guess. The mesh and the
/// reference ansatz are built on `cfg`.
pub fn solve_at(
    cfg: &Configuration,
    lambda: f64,
    seed: Option<&GridFunction>,
    points: Option<&Configuration>,
    opts: ContinuationOptions,
) -> Result<ContinuationStep> {
    let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
    let mesh = Arc::new(build_mesh(cfg, lambda, opts.base_n)?);
    let op = Arc::new(assemble_inverse(mesh.clone())?);
    let omega = ansatz_grid(&spec, mesh.clone());
    let first = match seed {
        Some(prev) => {
            let moved = prev.transfer(mesh.clone());
            let b = opts.blend;
            let blended: Vec<f64> = omega
                .values()
                .iter()
                .zip(moved.values())
                .map(|(a, p)| b * a + (1.0 - b) * p)
                .collect();
            GridFunction::new(mesh.clone(), blended)?
        }
        None => omega.clone(),
    };
    let start = points.unwrap_or(cfg);
    let (report, located) = match newton_solve(&op, &first, lambda, opts.newton) {
        Ok(r) => (r, None),
        Err(first_err) => {
            let reduced = match reduction_solve(&op, start, lambda, 1e-12) {
                Ok(r) => r,
                Err(_) => return Err(first_err),
            };
            let guess = GridFunction::new(mesh.clone(), reduced.u)?;
            (newton_solve(&op, &guess, lambda, opts.newton)?, Some(start.with_points(reduced.xi)?))
        }
    };
    let guess = located.unwrap_or_else(|| start.clone());
    let (points, phi) = orthogonal_decomposition(&report.solution, &guess, lambda)?;
    let mut report = report;
    report.diagnostics.remainder_sup = Some(phi.sup_norm());
    Ok(ContinuationStep { report, operator: op, ansatz: spec, points })
}

/// Geometric lambda sweep. Each step re-meshes for the new concentration
/// scales and seeds Newton with a blend of the fresh ansatz and the
/// previous solution.
pub fn continuation(
    cfg: &Configuration,
    lambda_start: f64,
    lambda_end: f64,
    factor: f64,
    opts: ContinuationOptions,
) -> Result<ContinuationOutcome> {
    let schedule = lambda_schedule(lambda_start, lambda_end, factor)?;
    let mut steps: Vec<ContinuationStep> = Vec::new();
    for lambda in schedule {
        let prev = steps.last();
        let seed = prev.map(|s| &s.report.solution);
        let points = prev.map(|s| &s.points);
        match solve_at(cfg, lambda, seed, points, opts) {
            Ok(step) => steps.push(step),
            Err(e) => return Ok(ContinuationOutcome { steps, failure: Some((lambda, e)) }),
        }
    }
    Ok(ContinuationOutcome { steps, failure: None })
}

/// `J(u) = 1/2 int f u - int g_lambda(u)` where `u = K f`; for a solution
/// `f = f_lambda(u)`.
pub fn energy(op: &KernelOperator, u: &GridFunction, lambda: f64) -> Result<f64> {
    let f = u.map(|t| f_lambda(t, lambda));
    energy_with_source(op, u, &f, lambda)
}

pub fn energy_with_source(op: &KernelOperator, u: &GridFunction, source: &GridFunction, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    same_mesh(op, u)?;
    same_mesh(op, source)?;
    guard(u.values())?;
    let j = 0.5 * source.dot(u) - u.map(|t| g_lambda(t, lambda)).integral();
    if !j.is_finite() {
        return Err(Error::NonFinite("energy".into()));
    }
    Ok(j)
}

/// Squared energy norm of the ansatz and its energy, via the pairing with
/// `sum_i a_i exp(U_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnsatzEnergy {
    pub norm_sq: f64,
    pub energy: f64,
    /// `-4 pi k log(lambda) - 2 pi sum F_i`
    pub norm_sq_prediction: f64,
    /// `-2 pi k log(lambda) - 2 pi k - pi sum F_i`
    pub energy_prediction: f64,
}

pub fn ansatz_energy(spec: &AnsatzSpec, mesh: Arc<Mesh>) -> Result<AnsatzEnergy> {
    let omega = ansatz_grid(spec, mesh.clone());
    let source = ansatz_source_grid(spec, mesh);
    guard(omega.values())?;
    let norm_sq = source.dot(&omega);
    let energy = 0.5 * norm_sq - omega.map(|t| g_lambda(t, spec.lambda)).integral();
    let k = spec.config.k() as f64;
    let sum_f: f64 = (0..spec.config.k())
        .map(|i| crate::bubbles::interaction_unchecked(&spec.config, i))
        .sum();
    let pi = std::f64::consts::PI;
    let log_l = spec.lambda.ln();
    Ok(AnsatzEnergy {
        norm_sq,
        energy,
        norm_sq_prediction: -4.0 * pi * k * log_l - 2.0 * pi * sum_f,
        energy_prediction: -2.0 * pi * k * log_l - 2.0 * pi * k - pi * sum_f,
    })
}

/// Smallest singular value of a square matrix by inverse iteration on
/// `(B^T B)^{-1}`.
pub(crate) fn smallest_singular(b: &DMatrix<f64>) -> Result<f64> {
    let n = b.nrows();
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    let lu = b.clone().lu();
    let lut = b.transpose().lu();
    if !lu.is_invertible() {
        return Ok(0.0);
    }
    // deterministic start with components in every direction
    let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 101) as f64 / 101.0);
    x /= x.norm();
    let mut est = 0.0;
    for _ in 0..2000 {
        let y = lu.solve(&x).ok_or(Error::SingularJacobian)?;
        let z = lut.solve(&y).ok_or(Error::SingularJacobian)?;
        let nz = z.norm();
        if !nz.is_finite() {
            return Err(Error::NonFinite("inverse iteration".into()));
        }
        let next = nz;
        x = z / nz;
        if (next - est).abs() <= 1e-12 * next {
            est = next;
            break;
        }
        est = next;
    }
    Ok(1.0 / est.sqrt())
}

/// Orthonormal basis (as columns) of the orthogonal complement of the span
/// of `vectors`.
pub(crate) fn complement_basis(vectors: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    let k = vectors.len();
    let mut a = DMatrix::<f64>::zeros(n, k);
    for (j, v) in vectors.iter().enumerate() {
        a.set_column(j, v);
    }
    let q = a.qr();
    // full Q from the Householder reflections applied to the identity
    let mut full = DMatrix::<f64>::identity(n, n);
    q.q_tr_mul(&mut full);
    full.transpose().columns(k, n - k).into_owned()
}

/// Smallest singular values of the linearized operator
/// `u -> u - K(f_lambda'(u_*) u)` in the energy norm, on the whole space and
/// on the energy-orthogonal complement of the projected translation modes.
///
/// With `u = K g` the energy norm is `g^T W K g`, so the operator is
/// represented by `I - D K` on densities, measured in the Cholesky factor of
/// the symmetrized Gram matrix `W K`.
pub fn linearized_smallest_singulars(
    op: &KernelOperator,
    u: &GridFunction,
    lambda: f64,
    cfg: &Configuration,
) -> Result<(f64, f64)> {
    check_lambda(lambda)?;
    same_mesh(op, u)?;
    guard(u.values())?;
    let n = op.len();
    let mesh = op.mesh();
    let w = mesh.weights();
    let k_mat = op.matrix();

    let mut gram = DMatrix::<f64>::from_fn(n, n, |i, j| w[i] * k_mat[(i, j)]);
    let gt = gram.transpose();
    gram = 0.5 * (gram + gt);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::NonFinite("energy Gram matrix is not positive definite".into()))?;
    let r = chol.l().transpose();

    // A_g = I - D K
    let mut a_g = -k_mat.clone();
    for (i, &t) in u.values().iter().enumerate() {
        let d = f_lambda_prime(t, lambda);
        a_g.row_mut(i).scale_mut(d);
        a_g[(i, i)] += 1.0;
    }
    // B = R A_g R^{-1}:  C = A_g R^{-1} solves C R = A_g, i.e. R^T C^T = A_g^T
    let ct = r
        .transpose()
        .solve_lower_triangular(&a_g.transpose())
        .ok_or(Error::SingularJacobian)?;
    let b = &r * ct.transpose();
    let sigma_full = smallest_singular(&b)?;

    let spec = AnsatzSpec::new(cfg.clone(), lambda)?;
    let modes: Vec<DVector<f64>> = spec
        .bubbles()
        .map(|p: BubbleParams| {
            let g = DVector::from_iterator(n, mesh.nodes().iter().map(|&x| p.exp_bubble(x) * p.z1(x)));
            &r * g
        })
        .collect();
    let q = complement_basis(&modes, n);
    let reduced = q.transpose() * &b * &q;
    let sigma_perp = smallest_singular(&reduced)?;
    Ok((sigma_full, sigma_perp))
}
