//! Restarted GMRES with right preconditioning.

use crate::error::{Error, Result};
use crate::fem::SparseMatrix;

use super::{norm2, SolverConfig};

/// Incomplete LU on the matrix's own pattern.
pub struct Ilu0 {
    lu: SparseMatrix<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let p = a.pattern().clone();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            diag.push(p.offset(i, i).ok_or_else(|| Error::LinearSolver {
                message: format!("row {i} has no diagonal entry"),
                residual: f64::NAN,
            })?);
        }
        let mut v = a.values().to_vec();
        let rp = p.row_ptr();
        let ci = p.col_idx();
        for i in 1..n {
            for o in rp[i]..rp[i + 1] {
                let k = ci[o];
                if k >= i {
                    break;
                }
                let piv = v[diag[k]];
                if piv == 0.0 {
                    return Err(Error::LinearSolver { message: format!("zero pivot at row {k}"), residual: f64::NAN });
                }
                v[o] /= piv;
                let lik = v[o];
                for o2 in (o + 1)..rp[i + 1] {
                    let j = ci[o2];
                    if let Some(okj) = p.offset(k, j) {
                        v[o2] -= lik * v[okj];
                    }
                }
            }
        }
        if diag.iter().any(|&d| v[d] == 0.0 || !v[d].is_finite()) {
            return Err(Error::LinearSolver { message: "zero pivot in ILU(0)".into(), residual: f64::NAN });
        }
        Ok(Ilu0 { lu: SparseMatrix::from_values(p, v)?, diag })
    }

    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let p = self.lu.pattern();
        let (rp, ci, v) = (p.row_ptr(), p.col_idx(), self.lu.values());
        let n = r.len();
        let mut y = r.to_vec();
        for i in 0..n {
            for o in rp[i]..self.diag[i] {
                y[i] -= v[o] * y[ci[o]];
            }
        }
        for i in (0..n).rev() {
            for o in (self.diag[i] + 1)..rp[i + 1] {
                y[i] -= v[o] * y[ci[o]];
            }
            y[i] /= v[self.diag[i]];
        }
        y
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        Ilu0::apply(self, r)
    }
}

pub fn gmres(a: &SparseMatrix<f64>, b: &[f64], pre: &Ilu0, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let target = (cfg.rtol * norm2(b)).max(cfg.atol);
    gmres_with(|x| a.mul_vec(x), b, None, pre, cfg.restart, cfg.max_iter, target)
}

/// GMRES on a matrix-free operator, starting from `x0` (zero if absent).
pub(crate) fn gmres_with<F, P>(
    op: F,
    b: &[f64],
    x0: Option<Vec<f64>>,
    pre: &P,
    restart: usize,
    max_iter: usize,
    target: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
    P: Preconditioner + ?Sized,
{
    let n = b.len();
    let m = restart.min(n.max(1));
    let mut x = x0.unwrap_or_else(|| vec![0.0; n]);
    let mut iters = 0;
    loop {
        let ax = op(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta <= target {
            return Ok(x);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            iters += 1;
            let mut w = op(&pre.apply(&basis[k]));
            for (j, vj) in basis.iter().enumerate() {
                let hj: f64 = w.iter().zip(vj).map(|(a, b)| a * b).sum();
                h[j][k] = hj;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hj * vi;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let d = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if d == 0.0 {
                break;
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= target || hn == 0.0 || iters >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        if k_used == 0 {
            break;
        }
        let mut yk = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * yk[j];
            }
            yk[i] = s / h[i][i];
        }
        let mut z = vec![0.0; n];
        for (j, yj) in yk.iter().enumerate() {
            for (zi, vi) in z.iter_mut().zip(&basis[j]) {
                *zi += yj * vi;
            }
        }
        for (xi, di) in x.iter_mut().zip(pre.apply(&z)) {
            *xi += di;
        }
        if iters >= max_iter {
            break;
        }
    }
    let r = norm2(&b.iter().zip(op(&x)).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
    if r <= target {
        return Ok(x);
    }
    Err(Error::LinearSolver {
        message: format!("GMRES did not converge in {iters} iterations"),
        residual: r,
    })
}
