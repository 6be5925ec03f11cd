use crate::error::{Error, Result};
use crate::field::NodalField;

use super::{Mesh, NO_CELL};

/// Locates points in a mesh by walking across facets, seeded from a bucket
/// grid over cell bounding boxes.
pub struct PointLocator<'a> {
    mesh: &'a Mesh,
    lower: [f64; 3],
    width: [f64; 3],
    shape: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let dim = mesh.dim();
        let (lo, hi) = mesh.bounds();
        let per_axis = ((mesh.num_cells() as f64).powf(1.0 / dim as f64).ceil() as usize).max(1);
        let mut lower = [0.0; 3];
        let mut width = [1.0; 3];
        let mut shape = [1; 3];
        for d in 0..dim {
            lower[d] = lo[d];
            shape[d] = per_axis;
            width[d] = (hi[d] - lo[d]) / per_axis as f64;
        }
        let mut buckets = vec![Vec::new(); shape.iter().product()];
        let this = PointLocator { mesh, lower, width, shape, buckets: Vec::new() };
        for k in 0..mesh.num_cells() {
            let mut bmin = [0usize; 3];
            let mut bmax = [0usize; 3];
            for d in 0..dim {
                let xs = mesh.cell(k).iter().map(|&v| mesh.vertex(v)[d]);
                let (mn, mx) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
                bmin[d] = this.bucket_coord(d, mn);
                bmax[d] = this.bucket_coord(d, mx);
            }
            for i in bmin[0]..=bmax[0] {
                for j in bmin[1]..=bmax[1] {
                    for l in bmin[2]..=bmax[2] {
                        buckets[i + shape[0] * (j + shape[1] * l)].push(k);
                    }
                }
            }
        }
        PointLocator { buckets, ..this }
    }

    fn bucket_coord(&self, d: usize, x: f64) -> usize {
        let b = ((x - self.lower[d]) / self.width[d]).floor();
        (b.max(0.0) as usize).min(self.shape[d] - 1)
    }

    fn bucket(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 3];
        for d in 0..self.mesh.dim() {
            idx[d] = self.bucket_coord(d, x[d]);
        }
        idx[0] + self.shape[0] * (idx[1] + self.shape[1] * idx[2])
    }

    fn min_bary(&self, k: usize, x: &[f64]) -> (f64, usize, [f64; 4]) {
        let lam = self.mesh.barycentric(k, x);
        let mut worst = (f64::INFINITY, 0);
        for i in 0..=self.mesh.dim() {
            if lam[i] < worst.0 {
                worst = (lam[i], i);
            }
        }
        (worst.0, worst.1, lam)
    }

    /// Distance outside cell `k` implied by its most negative barycentric
    /// coordinate.
    fn outside_distance(&self, k: usize, worst: f64, i: usize) -> f64 {
        if worst >= 0.0 {
            return 0.0;
        }
        let g = &self.mesh.geometry(k).grads[i];
        -worst / (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
    }

    /// Cell containing `x` and the barycentric coordinates there. `hint`
    /// seeds the walk.
    pub fn locate(&self, x: &[f64], hint: Option<usize>) -> Result<(usize, [f64; 4])> {
        let tol = 1e-10 * self.mesh.diameter();
        let start = hint.unwrap_or_else(|| self.buckets[self.bucket(x)].first().copied().unwrap_or(0));
        let mut k = start;
        for _ in 0..4 * self.mesh.num_cells().max(16) {
            let (worst, i, lam) = self.min_bary(k, x);
            if worst >= 0.0 || self.outside_distance(k, worst, i) <= tol * 1e-3 {
                return Ok((k, lam));
            }
            let f = self.mesh.cell_facets(k)[i];
            let cells = self.mesh.facets()[f].cells;
            let next = if cells[0] == k { cells[1] } else { cells[0] };
            if next == NO_CELL {
                break;
            }
            k = next;
        }
        // walk left the domain or cycled: best candidate from the buckets
        let mut best: Option<(f64, usize, [f64; 4])> = None;
        let candidates = &self.buckets[self.bucket(x)];
        for &c in candidates {
            let (worst, i, lam) = self.min_bary(c, x);
            let dist = self.outside_distance(c, worst, i);
            if best.map_or(true, |(b, _, _)| dist < b) {
                best = Some((dist, c, lam));
            }
        }
        match best {
            Some((dist, c, lam)) if dist <= tol => Ok((c, lam)),
            Some((dist, _, _)) => Err(Error::Geometry(format!(
                "point {:?} lies {dist:e} outside the source mesh (tolerance {tol:e})",
                x
            ))),
            None => Err(Error::Geometry(format!("point {:?} lies outside the source mesh", x))),
        }
    }

    /// Value of the P1 field `u` at `x`.
    pub fn evaluate(&self, u: &[f64], x: &[f64], hint: Option<usize>) -> Result<(f64, usize)> {
        let (k, lam) = self.locate(x, hint)?;
        let value = self.mesh.cell(k).iter().enumerate().map(|(i, &v)| lam[i] * u[v]).sum();
        Ok((value, k))
    }
}

/// Nodal interpolation of a P1 field onto another mesh of the same box.
pub fn transfer(field: &NodalField, from: &Mesh, to: &Mesh) -> Result<NodalField> {
    field.check_on(from)?;
    if from.id() == to.id() {
        return Ok(field.clone());
    }
    if from.dim() != to.dim() {
        return Err(Error::Geometry("meshes of different dimension".into()));
    }
    let locator = PointLocator::new(from);
    let u = field.values();
    let mut hint = None;
    let mut out = Vec::with_capacity(to.num_vertices());
    for x in to.vertices() {
        let (value, k) = locator.evaluate(u, x, hint)?;
        hint = Some(k);
        out.push(value);
    }
    NodalField::new(to, out)
}
