//! Dense solves for the large systems, through a blocked LU.

use faer::linalg::solvers::Solve;
use faer::Mat;
use nalgebra::{DMatrix, DVector};

/// Solves `a x = b` by LU with partial pivoting; `None` when the solution
/// is not finite.
pub(crate) fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    let fa = Mat::<f64>::from_fn(n, a.ncols(), |i, j| a[(i, j)]);
    let fb = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    let x = fa.partial_piv_lu().solve(&fb);
    let out = DVector::from_fn(n, |i, _| x[(i, 0)]);
    out.iter().all(|v| v.is_finite()).then_some(out)
}
