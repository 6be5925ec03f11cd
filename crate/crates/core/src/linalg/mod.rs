//! Sparse linear solvers, block systems and the Newton driver.

mod block;
mod direct;
mod iterative;
mod newton;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{Pattern, SparseMatrix};

pub use block::BlockSystem;
pub use direct::DirectSolver;
pub use iterative::{gmres, Ilu0, Preconditioner};
pub use newton::{newton_solve, NewtonReport};

/// Above this many unknowns the automatic method switches to GMRES.
pub const DIRECT_SIZE_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Sparse LU.
    Direct,
    /// Restarted GMRES with an ILU(0) preconditioner.
    Iterative,
    /// Direct below [`DIRECT_SIZE_LIMIT`] unknowns, iterative above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// GMRES iterations allowed with a stale LU as preconditioner before
    /// refactorizing; 0 factorizes every matrix afresh.
    pub reuse_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { method: SolverMethod::Auto, rtol: 1e-10, atol: 1e-12, max_iter: 2000, restart: 60, reuse_iter: 12 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.restart == 0 {
            return Err(Error::Config("solver iteration limits must be at least 1".into()));
        }
        Ok(())
    }

    fn use_direct(&self, n: usize) -> bool {
        match self.method {
            SolverMethod::Direct => true,
            SolverMethod::Iterative => false,
            SolverMethod::Auto => n < DIRECT_SIZE_LIMIT,
        }
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn residual(a: &SparseMatrix<f64>, x: &[f64], b: &[f64], transpose: bool) -> Vec<f64> {
    let ax = if transpose { a.transpose_mul_vec(x) } else { a.mul_vec(x) };
    b.iter().zip(ax).map(|(bi, ai)| bi - ai).collect()
}

/// Stateful solver that keeps the symbolic LU of the last sparsity pattern
/// and its most recent numeric factorization.
///
/// A new matrix on the same pattern is first tried with GMRES preconditioned
/// by the old factorization; only when that stalls is it refactorized.
pub struct LinearSolver {
    cfg: SolverConfig,
    symbolic: Option<(Arc<Pattern>, direct::Symbolic)>,
    numeric: Option<DirectSolver>,
    factorizations: usize,
}

impl LinearSolver {
    pub fn new(cfg: SolverConfig) -> Self {
        LinearSolver { cfg, symbolic: None, numeric: None, factorizations: 0 }
    }

    /// Numeric factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn solve(&mut self, a: &SparseMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(a, b, false)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&mut self, a: &SparseMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_impl(a, b, true)
    }

    /// Direct factorization reusing the cached symbolic analysis.
    pub fn factorize(&mut self, a: &SparseMatrix<f64>) -> Result<DirectSolver> {
        if !self.same_pattern(a) {
            let sym = direct::Symbolic::analyze(a)?;
            self.symbolic = Some((a.pattern().clone(), sym));
            self.numeric = None;
        }
        let (_, sym) = self.symbolic.as_ref().expect("symbolic factorization");
        self.factorizations += 1;
        DirectSolver::factorize_with(sym, a)
    }

    fn same_pattern(&self, a: &SparseMatrix<f64>) -> bool {
        matches!(&self.symbolic, Some((p, _)) if Arc::ptr_eq(p, a.pattern()) || **p == **a.pattern())
    }

    fn try_stale(&self, a: &SparseMatrix<f64>, b: &[f64], transpose: bool, target: f64) -> Option<Vec<f64>> {
        if self.cfg.reuse_iter == 0 || !self.same_pattern(a) {
            return None;
        }
        let lu = self.numeric.as_ref()?;
        let pre = direct::LuPreconditioner { lu, transpose };
        let x0 = lu.apply(b, transpose);
        let op = |x: &[f64]| if transpose { a.transpose_mul_vec(x) } else { a.mul_vec(x) };
        let it = self.cfg.reuse_iter;
        iterative::gmres_with(op, b, Some(x0), &pre, it, it, target).ok()
    }

    fn solve_impl(&mut self, a: &SparseMatrix<f64>, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n {
            return Err(Error::Dimension(format!("system {}x{} with right-hand side {}", n, a.ncols(), b.len())));
        }
        if b.iter().any(|v| !v.is_finite()) || !a.is_finite() {
            return Err(Error::NonFinite("linear system".into()));
        }
        let target = (self.cfg.rtol * norm2(b)).max(self.cfg.atol);
        let x = if self.cfg.use_direct(n) {
            if let Some(x) = self.try_stale(a, b, transpose, target) {
                return Ok(x);
            }
            let lu = self.factorize(a)?;
            let mut x = if transpose { lu.solve_transpose(b)? } else { lu.solve(b)? };
            // a few steps of iterative refinement if the first solve falls short
            for _ in 0..3 {
                let r = residual(a, &x, b, transpose);
                if norm2(&r) <= target {
                    break;
                }
                let dx = if transpose { lu.solve_transpose(&r)? } else { lu.solve(&r)? };
                for (xi, di) in x.iter_mut().zip(dx) {
                    *xi += di;
                }
            }
            self.numeric = Some(lu);
            x
        } else {
            let owned;
            let op = if transpose {
                owned = a.transpose();
                &owned
            } else {
                a
            };
            let pre = Ilu0::new(op)?;
            gmres(op, b, &pre, &self.cfg)?
        };
        let res = norm2(&residual(a, &x, b, transpose));
        if !res.is_finite() || res > target {
            return Err(Error::LinearSolver { message: "residual above tolerance".into(), residual: res });
        }
        Ok(x)
    }
}

/// One-shot solve of a block system.
pub fn solve_linear(sys: &BlockSystem, cfg: &SolverConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let a = sys.monolithic()?;
    LinearSolver::new(*cfg).solve(&a, sys.rhs())
}
