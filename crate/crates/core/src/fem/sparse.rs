//! Compressed sparse row storage.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparsity structure shared between matrices assembled on one mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl Pattern {
    /// `rows[i]` lists the columns of row `i`; they are sorted and deduplicated.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            if let Some(&c) = r.last() {
                if c >= ncols {
                    return Err(Error::Dimension(format!("column {c} out of range {ncols}")));
                }
            }
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        Ok(Pattern { nrows: row_ptr.len() - 1, ncols, row_ptr, col_idx })
    }

    /// Raw CSR arrays; each row must be strictly increasing.
    pub fn from_csr(ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        if row_ptr.first() != Some(&0) || row_ptr.last() != Some(&col_idx.len()) {
            return Err(Error::Dimension("malformed row pointer".into()));
        }
        for w in row_ptr.windows(2) {
            let row = col_idx.get(w[0]..w[1]).ok_or_else(|| Error::Dimension("malformed row pointer".into()))?;
            if row.windows(2).any(|c| c[0] >= c[1]) || row.last().is_some_and(|&c| c >= ncols) {
                return Err(Error::Dimension("row columns not strictly increasing or out of range".into()));
            }
        }
        Ok(Pattern { nrows: row_ptr.len() - 1, ncols, row_ptr, col_idx })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Storage offset of entry `(i, j)`, if structurally present.
    pub fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.row(i).binary_search(&j).ok().map(|p| start + p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<S> {
    pattern: Arc<Pattern>,
    values: Vec<S>,
}

impl<S: Scalar> SparseMatrix<S> {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![S::zero(); pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn from_values(pattern: Arc<Pattern>, values: Vec<S>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(Error::Dimension(format!("{} values for {} stored entries", values.len(), pattern.nnz())));
        }
        Ok(SparseMatrix { pattern, values })
    }

    /// Sums duplicate triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, S)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Dimension(format!("entry ({i}, {j}) outside {nrows}x{ncols}")));
            }
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(ncols, rows)?);
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let o = m.pattern.offset(i, j).expect("entry in pattern");
            m.values[o] += v;
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, S::one())).collect();
        Self::from_triplets(n, n, &triplets).expect("valid identity")
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.pattern.offset(i, j).map_or(S::zero(), |o| self.values[o])
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.ncols(), "matrix-vector size mismatch");
        (0..self.nrows())
            .map(|i| {
                let (a, b) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
                self.pattern.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.nrows(), "matrix-vector size mismatch");
        let mut y = vec![S::zero(); self.ncols()];
        for i in 0..self.nrows() {
            for o in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                y[self.pattern.col_idx[o]] += self.values[o] * x[i];
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn inner(&self, x: &[S], y: &[S]) -> S {
        x.iter().zip(self.mul_vec(y)).map(|(&a, b)| a * b).sum()
    }

    pub fn row_sums(&self) -> Vec<S> {
        (0..self.nrows())
            .map(|i| self.values[self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1]].iter().copied().sum())
            .collect()
    }

    pub fn scaled(&self, s: S) -> Self {
        SparseMatrix { pattern: self.pattern.clone(), values: self.values.iter().map(|&v| v * s).collect() }
    }

    /// `self += s * other`; both must share one pattern.
    pub fn add_scaled(&mut self, s: S, other: &SparseMatrix<S>) -> Result<()> {
        if self.pattern != other.pattern {
            return Err(Error::Dimension("matrices have different sparsity patterns".into()));
        }
        for (a, &b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    /// `sum_k c_k A_k` over matrices sharing a pattern.
    pub fn combination(terms: &[(S, &SparseMatrix<S>)]) -> Result<Self> {
        let (first_s, first) = terms.first().ok_or_else(|| Error::Dimension("empty combination".into()))?;
        let mut out = first.scaled(*first_s);
        for (s, m) in &terms[1..] {
            out.add_scaled(*s, m)?;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.values.len());
        for i in 0..self.nrows() {
            for o in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                triplets.push((self.pattern.col_idx[o], i, self.values[o]));
            }
        }
        Self::from_triplets(self.ncols(), self.nrows(), &triplets).expect("valid transpose")
    }

    pub fn to_dense(&self) -> Vec<Vec<S>> {
        let mut d = vec![vec![S::zero(); self.ncols()]; self.nrows()];
        for i in 0..self.nrows() {
            for o in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                d[i][self.pattern.col_idx[o]] += self.values[o];
            }
        }
        d
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
