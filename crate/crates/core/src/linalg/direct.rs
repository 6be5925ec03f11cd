//! Sparse LU backed by `faer`.
//!
//! Our CSR arrays, read as CSC, describe `A^T`; factorizing that matrix lets
//! `A x = b` be solved through the transposed solve and `A^T x = b` through
//! the plain one.

use std::panic::AssertUnwindSafe;
use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::lu::{factorize_symbolic_lu, LuRef, LuSymbolicParams, NumericLu, SymbolicLu};
use faer::sparse::linalg::SupernodalThreshold;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par};

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;

use super::iterative::Preconditioner;

#[derive(Clone)]
pub(crate) struct Symbolic {
    inner: Arc<SymbolicLu<usize>>,
}

fn csc_of_transpose(a: &SparseMatrix<f64>) -> SymbolicSparseColMatRef<'_, usize> {
    let p = a.pattern();
    SymbolicSparseColMatRef::new_checked(p.ncols(), p.nrows(), p.row_ptr(), None, p.col_idx())
}

fn lu_error(message: String) -> Error {
    Error::LinearSolver { message, residual: f64::NAN }
}

impl Symbolic {
    pub(crate) fn analyze(a: &SparseMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension("LU of a non-square matrix".into()));
        }
        let params = LuSymbolicParams {
            supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
            ..Default::default()
        };
        let inner = factorize_symbolic_lu(csc_of_transpose(a), params)
            .map_err(|e| lu_error(format!("symbolic LU failed: {e:?}")))?;
        Ok(Symbolic { inner: Arc::new(inner) })
    }
}

pub struct DirectSolver {
    n: usize,
    symbolic: Symbolic,
    numeric: NumericLu<usize, f64>,
}

impl DirectSolver {
    pub fn factorize(a: &SparseMatrix<f64>) -> Result<Self> {
        let sym = Symbolic::analyze(a)?;
        Self::factorize_with(&sym, a)
    }

    pub(crate) fn factorize_with(sym: &Symbolic, a: &SparseMatrix<f64>) -> Result<Self> {
        let mat = SparseColMatRef::new(csc_of_transpose(a), a.values());
        let s = &*sym.inner;
        let mut numeric = NumericLu::new();
        let mut buf = MemBuffer::new(s.factorize_numeric_lu_scratch::<f64>(Par::Seq, Default::default()));
        // faer panics on an exactly zero pivot rather than returning an error
        std::panic::catch_unwind(AssertUnwindSafe(|| {
            s.factorize_numeric_lu(&mut numeric, mat, Par::Seq, MemStack::new(&mut buf), Default::default())
                .map(|_| ())
        }))
        .map_err(|_| lu_error("singular matrix (zero pivot)".into()))?
        .map_err(|e| lu_error(format!("LU factorization failed: {e:?}")))?;
        Ok(DirectSolver { n: a.nrows(), symbolic: sym.clone(), numeric })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn run(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::Dimension(format!("right-hand side of length {} for {} unknowns", b.len(), self.n)));
        }
        let x = self.apply(b, transpose);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver { message: "singular matrix".into(), residual: f64::INFINITY });
        }
        Ok(x)
    }

    pub(crate) fn apply(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let s = &*self.symbolic.inner;
        // SAFETY: `numeric` was produced by `factorize_numeric_lu` on `s`.
        let lu = unsafe { LuRef::new_unchecked(s, &self.numeric) };
        let mut x = b.to_vec();
        {
            let rhs = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
            if transpose {
                let mut buf = MemBuffer::new(s.solve_in_place_scratch::<f64>(1, Par::Seq));
                lu.solve_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
            } else {
                let mut buf = MemBuffer::new(s.solve_transpose_in_place_scratch::<f64>(1, Par::Seq));
                lu.solve_transpose_in_place_with_conj(Conj::No, rhs, Par::Seq, MemStack::new(&mut buf));
            }
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, false)
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.run(b, true)
    }
}

/// A factorization used as a preconditioner, possibly for a nearby matrix.
pub(crate) struct LuPreconditioner<'a> {
    pub lu: &'a DirectSolver,
    pub transpose: bool,
}

impl Preconditioner for LuPreconditioner<'_> {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.lu.apply(r, self.transpose)
    }
}
