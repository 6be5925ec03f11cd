//! Newton's method for sparse nonlinear systems.

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;

use super::{norm2, LinearSolver};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Euclidean residual norm before the first step and after each step.
    pub residual_norms: Vec<f64>,
}

/// Solves `F(x) = 0` until `|F(x)| <= tol (1 + |F(x0)|)`.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: Vec<f64>,
    tol: f64,
    max_iter: usize,
    solver: &mut LinearSolver,
) -> Result<(Vec<f64>, NewtonReport)>
where
    R: FnMut(&[f64]) -> Result<Vec<f64>>,
    J: FnMut(&[f64]) -> Result<SparseMatrix<f64>>,
{
    let mut x = guess;
    let mut r = residual(&x)?;
    let r0 = norm2(&r);
    if !r0.is_finite() {
        return Err(Error::NonFinite("Newton residual".into()));
    }
    let target = tol * (1.0 + r0);
    let mut report = NewtonReport { iterations: 0, residual_norms: vec![r0] };
    let mut rn = r0;
    while rn > target {
        if report.iterations >= max_iter {
            return Err(Error::Newton { iterations: report.iterations, residual: rn });
        }
        let a = jacobian(&x)?;
        for v in r.iter_mut() {
            *v = -*v;
        }
        let dx = solver.solve(&a, &r)?;
        for (xi, di) in x.iter_mut().zip(dx) {
            *xi += di;
        }
        r = residual(&x)?;
        rn = norm2(&r);
        report.iterations += 1;
        report.residual_norms.push(rn);
        if !rn.is_finite() {
            return Err(Error::NonFinite("Newton residual".into()));
        }
    }
    Ok((x, report))
}
