//! Block-structured systems, flattened field-major.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{Pattern, SparseMatrix};

#[derive(Debug, Clone)]
pub struct BlockSystem {
    sizes: Vec<usize>,
    blocks: Vec<Option<SparseMatrix<f64>>>,
    rhs: Vec<f64>,
}

impl BlockSystem {
    pub fn new(sizes: Vec<usize>) -> Self {
        let nb = sizes.len();
        let total = sizes.iter().sum();
        BlockSystem { sizes, blocks: vec![None; nb * nb], rhs: vec![0.0; total] }
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self) -> usize {
        self.rhs.len()
    }

    fn offset(&self, b: usize) -> usize {
        self.sizes[..b].iter().sum()
    }

    pub fn set_block(&mut self, i: usize, j: usize, m: SparseMatrix<f64>) -> Result<()> {
        let nb = self.num_blocks();
        if i >= nb || j >= nb {
            return Err(Error::Dimension(format!("block ({i}, {j}) outside {nb}x{nb}")));
        }
        if m.nrows() != self.sizes[i] || m.ncols() != self.sizes[j] {
            return Err(Error::Dimension(format!(
                "block ({i}, {j}) is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                self.sizes[i],
                self.sizes[j]
            )));
        }
        self.blocks[i * nb + j] = Some(m);
        Ok(())
    }

    pub fn block(&self, i: usize, j: usize) -> Option<&SparseMatrix<f64>> {
        self.blocks[i * self.num_blocks() + j].as_ref()
    }

    pub fn set_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        if rhs.len() != self.size() {
            return Err(Error::Dimension(format!("right-hand side of length {} for {} unknowns", rhs.len(), self.size())));
        }
        self.rhs = rhs;
        Ok(())
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn rhs_block_mut(&mut self, b: usize) -> &mut [f64] {
        let o = self.offset(b);
        let n = self.sizes[b];
        &mut self.rhs[o..o + n]
    }

    /// Single sparse matrix; absent blocks are zero.
    pub fn monolithic(&self) -> Result<SparseMatrix<f64>> {
        let nb = self.num_blocks();
        let total = self.size();
        let nnz: usize = self.blocks.iter().flatten().map(|m| m.values().len()).sum();
        let mut row_ptr = Vec::with_capacity(total + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for bi in 0..nb {
            for r in 0..self.sizes[bi] {
                for bj in 0..nb {
                    if let Some(m) = self.block(bi, bj) {
                        let o = self.offset(bj);
                        let p = m.pattern();
                        let range = p.row_ptr()[r]..p.row_ptr()[r + 1];
                        col_idx.extend(p.col_idx()[range.clone()].iter().map(|c| c + o));
                        values.extend_from_slice(&m.values()[range]);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        // columns are already sorted and unique since blocks are visited left to right
        let pattern = Arc::new(Pattern::from_csr(total, row_ptr, col_idx)?);
        SparseMatrix::from_values(pattern, values)
    }

    /// The block transpose: block (i, j) of the result is block (j, i) transposed.
    pub fn transpose(&self) -> BlockSystem {
        let nb = self.num_blocks();
        let mut out = BlockSystem::new(self.sizes.clone());
        for i in 0..nb {
            for j in 0..nb {
                out.blocks[j * nb + i] = self.block(i, j).map(|m| m.transpose());
            }
        }
        out.rhs = self.rhs.clone();
        out
    }
}
