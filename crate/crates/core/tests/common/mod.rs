#![allow(dead_code)]

//! Independent reference computations for the acceptance suite.

use std::ops::{Add, Mul, Neg, Sub};

use chg_core::mesh::Mesh;
use chg_core::model::ModelParams;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Value and one directional derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    pub v: f64,
    pub d: f64,
}

impl Dual {
    pub fn c(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self * o.v, d: self * o.d }
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual { v: -self.v, d: -self.d }
    }
}

/// Gauss-Legendre rule on [0, 1] by Golub-Welsch.
pub fn gauss_legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = k as f64 / ((4 * k * k - 1) as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let e = SymmetricEigen::new(j);
    (0..n).map(|i| ((e.eigenvalues[i] + 1.0) / 2.0, e.eigenvectors[(0, i)].powi(2))).collect()
}

/// Collapsed tensor rule on the reference triangle: barycentric points and
/// weights summing to one.
pub fn triangle_rule(n: usize) -> Vec<([f64; 3], f64)> {
    let g = gauss_legendre01(n);
    let mut out = Vec::new();
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            let l1 = u;
            let l2 = v * (1.0 - u);
            out.push(([l1, l2, 1.0 - l1 - l2], 2.0 * wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Area and barycentric gradients of a triangle.
pub fn triangle_geometry(x: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let m = DMatrix::from_row_slice(3, 3, &[x[0][0], x[1][0], x[2][0], x[0][1], x[1][1], x[2][1], 1.0, 1.0, 1.0]);
    let area = 0.5 * m.determinant().abs();
    let inv = m.try_inverse().expect("non-degenerate triangle");
    let g = [[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]], [inv[(2, 0)], inv[(2, 1)]]];
    (area, g)
}

fn clamp01(d: Dual) -> Dual {
    if d.v <= 0.0 {
        Dual::c(0.0)
    } else if d.v >= 1.0 {
        Dual::c(1.0)
    } else {
        d
    }
}

fn f_plus_prime(r: Dual) -> Dual {
    let m = if r.v < 0.0 { r } else { Dual::c(0.0) };
    4.0 * r * r * r + 2.0 * r - 6.0 * m * m
}

fn f_minus_prime(r: Dual) -> Dual {
    let m = if r.v > 0.0 { r } else { Dual::c(0.0) };
    -6.0 * m * m
}

/// Brute-force weak form of one time step on a triangle mesh, written out
/// term by term. Unknowns are `(phi, mu, sigma)` stacked; the chemical
/// potential equation carries a factor `dt`.
pub struct DenseStep<'a> {
    pub mesh: &'a Mesh,
    pub params: &'a ModelParams,
    pub dt: f64,
    rule: Vec<([f64; 3], f64)>,
}

impl<'a> DenseStep<'a> {
    pub fn new(mesh: &'a Mesh, params: &'a ModelParams, dt: f64) -> Self {
        assert_eq!(mesh.dim(), 2);
        DenseStep { mesh, params, dt, rule: triangle_rule(8) }
    }

    pub fn n(&self) -> usize {
        self.mesh.num_vertices()
    }

    fn cell(&self, k: usize) -> ([usize; 3], f64, [[f64; 2]; 3]) {
        let c = self.mesh.cell(k);
        let idx = [c[0], c[1], c[2]];
        let x = idx.map(|v| {
            let p = self.mesh.vertex(v);
            [p[0], p[1]]
        });
        let (area, g) = triangle_geometry(x);
        (idx, area, g)
    }

    /// `int u chi_i` for a nodal `u`.
    pub fn mass_apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for k in 0..self.mesh.num_cells() {
            let (idx, area, _) = self.cell(k);
            for (l, w) in &self.rule {
                let uq: f64 = (0..3).map(|a| u[idx[a]] * l[a]).sum();
                for a in 0..3 {
                    out[idx[a]] += area * w * uq * l[a];
                }
            }
        }
        out
    }

    /// Residual at `x = (phi, mu, sigma)` given `prev = (phi_prev, sigma_prev)`.
    pub fn residual(&self, x: &[Dual], prev: &[Dual]) -> Vec<Dual> {
        let p = self.params;
        let dt = self.dt;
        let n = self.n();
        let zero = Dual::c(0.0);
        let mut r = vec![zero; 3 * n];
        for k in 0..self.mesh.num_cells() {
            let (idx, area, g) = self.cell(k);
            let nodal = |off: usize, src: &[Dual]| idx.map(|v| src[off + v]);
            let (phi, mu, sig) = (nodal(0, x), nodal(n, x), nodal(2 * n, x));
            let (phip, sigp) = (nodal(0, prev), nodal(n, prev));
            let grad = |u: [Dual; 3]| {
                let mut gx = zero;
                let mut gy = zero;
                for a in 0..3 {
                    gx = gx + g[a][0] * u[a];
                    gy = gy + g[a][1] * u[a];
                }
                (gx, gy)
            };
            let (gphi, gmu, gsig) = (grad(phi), grad(mu), grad(sig));
            for i in 0..3 {
                let dot = |(gx, gy): (Dual, Dual)| area * (gx * Dual::c(g[i][0]) + gy * Dual::c(g[i][1]));
                let (ri_phi, ri_mu, ri_sig) = (idx[i], n + idx[i], 2 * n + idx[i]);
                r[ri_phi] = r[ri_phi] + (dt * p.d_phi) * dot(gmu);
                r[ri_mu] = r[ri_mu] + (dt * p.eps * p.eps) * dot(gphi);
                r[ri_sig] = r[ri_sig] + (dt * p.d_sigma / p.delta) * dot(gsig) - (dt * p.d_sigma * p.chi) * dot(gphi);
            }
            for (l, w) in &self.rule {
                let at = |u: [Dual; 3]| {
                    let mut s = zero;
                    for a in 0..3 {
                        s = s + l[a] * u[a];
                    }
                    s
                };
                let (f, m, s) = (at(phi), at(mu), at(sig));
                let (fp, sp) = (at(phip), at(sigp));
                let prolif = clamp01(fp);
                let reaction = prolif * ((1.0 / p.delta) * s + p.chi * (Dual::c(1.0) - f) - m);
                let death = p.c * clamp01(fp);
                let chem = p.gamma * (f_plus_prime(f) + f_minus_prime(fp)) - p.chi * s - m;
                for i in 0..3 {
                    let wi = area * w * l[i];
                    let ri = idx[i];
                    r[ri] = r[ri] + wi * (f - fp - (dt * p.p0 * p.delta) * reaction + dt * death);
                    r[n + ri] = r[n + ri] + (wi * dt) * chem;
                    r[2 * n + ri] = r[2 * n + ri]
                        + wi * (s - sp + (dt * p.p0 * p.delta) * reaction - (dt * p.kappa) * (Dual::c(1.0) - s));
                }
            }
        }
        r
    }

    pub fn residual_f64(&self, x: &[f64], prev: &[f64]) -> Vec<f64> {
        let xd: Vec<Dual> = x.iter().map(|&v| Dual::c(v)).collect();
        let pd: Vec<Dual> = prev.iter().map(|&v| Dual::c(v)).collect();
        self.residual(&xd, &pd).iter().map(|d| d.v).collect()
    }

    /// Jacobians in the new unknowns (3n x 3n) and in `prev` (3n x 2n).
    pub fn jacobians(&self, x: &[f64], prev: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut a = DMatrix::zeros(3 * n, 3 * n);
        let mut b = DMatrix::zeros(3 * n, 2 * n);
        let base_x: Vec<Dual> = x.iter().map(|&v| Dual::c(v)).collect();
        let base_p: Vec<Dual> = prev.iter().map(|&v| Dual::c(v)).collect();
        for j in 0..3 * n {
            let mut xd = base_x.clone();
            xd[j].d = 1.0;
            for (i, r) in self.residual(&xd, &base_p).iter().enumerate() {
                a[(i, j)] = r.d;
            }
        }
        for j in 0..2 * n {
            let mut pd = base_p.clone();
            pd[j].d = 1.0;
            for (i, r) in self.residual(&base_x, &pd).iter().enumerate() {
                b[(i, j)] = r.d;
            }
        }
        (a, b)
    }

    /// Newton with dense LU from `(phi_prev, 0, sigma_prev)`.
    pub fn solve(&self, prev: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x: Vec<f64> = prev[..n].iter().copied().chain(std::iter::repeat(0.0).take(n)).chain(prev[n..].iter().copied()).collect();
        for _ in 0..50 {
            let r = self.residual_f64(&x, prev);
            if r.iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-15 {
                return x;
            }
            let (a, _) = self.jacobians(&x, prev);
            let dx = a.lu().solve(&DVector::from_vec(r)).expect("non-singular Jacobian");
            for (xi, d) in x.iter_mut().zip(dx.iter()) {
                *xi -= d;
            }
        }
        let r = self.residual_f64(&x, prev);
        assert!(r.iter().all(|v| v.abs() < 1e-13), "dense Newton stalled");
        x
    }
}

/// `A^T y = b` densely.
pub fn solve_transposed(a: &DMatrix<f64>, b: Vec<f64>) -> Vec<f64> {
    a.transpose().lu().solve(&DVector::from_vec(b)).expect("non-singular").iter().copied().collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Area and centroid of `{u_h >= level}`, and the area of its symmetric
/// difference with the disc `|x - c| <= r`, by sampling each triangle on a
/// `k x k` sub-triangulation.
pub fn superlevel_vs_disc(mesh: &Mesh, u: &[f64], level: f64, c: [f64; 2], r: f64, k: usize) -> (f64, [f64; 2], f64) {
    let mut area = 0.0;
    let mut moment = [0.0; 2];
    let mut sym = 0.0;
    let kf = k as f64;
    let mut pts = Vec::new();
    for i in 0..k {
        for j in 0..k - i {
            pts.push([(i as f64 + 1.0 / 3.0) / kf, (j as f64 + 1.0 / 3.0) / kf]);
            if i + j + 1 < k {
                pts.push([(i as f64 + 2.0 / 3.0) / kf, (j as f64 + 2.0 / 3.0) / kf]);
            }
        }
    }
    assert_eq!(pts.len(), k * k);
    for cell in 0..mesh.num_cells() {
        let v = mesh.cell(cell);
        let w = mesh.cell_volume(cell) / (kf * kf);
        for p in &pts {
            let l = [p[0], p[1], 1.0 - p[0] - p[1]];
            let mut x = [0.0; 2];
            let mut val = 0.0;
            for a in 0..3 {
                let xa = mesh.vertex(v[a]);
                x[0] += l[a] * xa[0];
                x[1] += l[a] * xa[1];
                val += l[a] * u[v[a]];
            }
            let inside = val >= level;
            let in_disc = (x[0] - c[0]).hypot(x[1] - c[1]) <= r;
            if inside {
                area += w;
                moment[0] += w * x[0];
                moment[1] += w * x[1];
            }
            if inside != in_disc {
                sym += w;
            }
        }
    }
    let centroid = if area > 0.0 { [moment[0] / area, moment[1] / area] } else { [f64::NAN; 2] };
    (area, centroid, sym)
}
