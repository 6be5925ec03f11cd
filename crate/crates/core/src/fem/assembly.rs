//! Global assembly of P1 operators and loads.
//!
//! Element contributions are computed in parallel and scattered in cell
//! order, so results do not depend on the thread count.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::mesh::Mesh;

use super::{FeSpace, Pattern, SparseMatrix};

const PAR_MIN_CELLS: usize = 256;

pub(crate) fn vertex_pattern(mesh: &Mesh) -> Result<(Arc<Pattern>, Vec<[usize; 16]>)> {
    let n = mesh.num_vertices();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for cell in mesh.cells() {
        for &a in cell {
            rows[a].extend_from_slice(cell);
        }
    }
    let pattern = Arc::new(Pattern::from_rows(n, rows)?);
    let offsets = mesh
        .cells()
        .map(|cell| {
            let mut offs = [usize::MAX; 16];
            for (i, &a) in cell.iter().enumerate() {
                for (j, &b) in cell.iter().enumerate() {
                    offs[4 * i + j] = pattern.offset(a, b).expect("cell pair in pattern");
                }
            }
            offs
        })
        .collect();
    Ok((pattern, offsets))
}

fn check_cells(mesh: &Mesh) -> Result<()> {
    for k in 0..mesh.num_cells() {
        let v = mesh.cell_volume(k);
        if !(v > 0.0) {
            return Err(Error::DegenerateCell { cell: k, volume: v });
        }
    }
    Ok(())
}

/// Computes one `4 x 4` local matrix per cell and sums them into the pattern.
fn assemble_matrix<F>(mesh: &Mesh, pattern: &Arc<Pattern>, offsets: &[[usize; 16]], local: F) -> SparseMatrix<f64>
where
    F: Fn(usize) -> [f64; 16] + Sync,
{
    let locals: Vec<[f64; 16]> = (0..mesh.num_cells()).into_par_iter().with_min_len(PAR_MIN_CELLS).map(&local).collect();
    let nb = mesh.dim() + 1;
    let mut m = SparseMatrix::zeros(pattern.clone());
    let values = m.values_mut();
    for (offs, loc) in offsets.iter().zip(&locals) {
        for i in 0..nb {
            for j in 0..nb {
                values[offs[4 * i + j]] += loc[4 * i + j];
            }
        }
    }
    m
}

fn assemble_vector<F>(mesh: &Mesh, local: F) -> Vec<f64>
where
    F: Fn(usize) -> [f64; 4] + Sync,
{
    let locals: Vec<[f64; 4]> = (0..mesh.num_cells()).into_par_iter().with_min_len(PAR_MIN_CELLS).map(&local).collect();
    let mut b = vec![0.0; mesh.num_vertices()];
    for (cell, loc) in mesh.cells().zip(&locals) {
        for (i, &v) in cell.iter().enumerate() {
            b[v] += loc[i];
        }
    }
    b
}

pub(crate) fn exact_mass(mesh: &Mesh, pattern: &Arc<Pattern>, offsets: &[[usize; 16]]) -> Result<SparseMatrix<f64>> {
    check_cells(mesh)?;
    let d = mesh.dim() as f64;
    let nb = mesh.dim() + 1;
    Ok(assemble_matrix(mesh, pattern, offsets, |k| {
        // |K| (1 + delta_ij) / ((d + 1)(d + 2))
        let base = mesh.cell_volume(k) / ((d + 1.0) * (d + 2.0));
        let mut loc = [0.0; 16];
        for i in 0..nb {
            for j in 0..nb {
                loc[4 * i + j] = if i == j { 2.0 * base } else { base };
            }
        }
        loc
    }))
}

pub(crate) fn exact_stiffness(mesh: &Mesh, pattern: &Arc<Pattern>, offsets: &[[usize; 16]]) -> Result<SparseMatrix<f64>> {
    check_cells(mesh)?;
    let nb = mesh.dim() + 1;
    Ok(assemble_matrix(mesh, pattern, offsets, |k| {
        let geo = mesh.geometry(k);
        let mut loc = [0.0; 16];
        for i in 0..nb {
            for j in 0..nb {
                let g: f64 = (0..3).map(|c| geo.grads[i][c] * geo.grads[j][c]).sum();
                loc[4 * i + j] = geo.volume * g;
            }
        }
        loc
    }))
}

/// `M_ij = int chi_i chi_j`.
pub fn mass_matrix(mesh: &Mesh) -> Result<SparseMatrix<f64>> {
    let (pattern, offsets) = vertex_pattern(mesh)?;
    exact_mass(mesh, &pattern, &offsets)
}

/// `K_ij = int grad chi_i . grad chi_j`.
pub fn stiffness_matrix(mesh: &Mesh) -> Result<SparseMatrix<f64>> {
    let (pattern, offsets) = vertex_pattern(mesh)?;
    exact_stiffness(mesh, &pattern, &offsets)
}

/// A quadrature point of one cell, handed to coefficient closures.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint<'a> {
    pub cell: usize,
    pub index: usize,
    /// Barycentric coordinates (= values of the cell's hat functions).
    pub lambda: &'a [f64; 4],
    pub vertices: &'a [usize],
}

impl QuadPoint<'_> {
    /// Value of a P1 field at this point.
    #[inline]
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.vertices.iter().zip(self.lambda).map(|(&v, &l)| l * u[v]).sum()
    }

    #[inline]
    pub fn eval_field(&self, u: &NodalField) -> f64 {
        self.eval(u.values())
    }
}

fn check_finite(value: f64, cell: usize, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Assembly(format!("{what} is {value} at a quadrature point of cell {cell}")))
    }
}

/// `A_ij = Q[c chi_i chi_j]` with the space's fixed rule.
pub fn weighted_mass<F>(space: &FeSpace, coeff: F) -> Result<SparseMatrix<f64>>
where
    F: Fn(&QuadPoint) -> f64 + Sync,
{
    let mesh = space.mesh();
    let rule = space.rule();
    let nb = mesh.dim() + 1;
    let scale = 1.0 / rule.reference_volume();
    let bad = std::sync::atomic::AtomicUsize::new(usize::MAX);
    let m = assemble_matrix(mesh, space.pattern(), space.cell_offsets(), |k| {
        let vertices = mesh.cell(k);
        let vol = mesh.cell_volume(k) * scale;
        let mut loc = [0.0; 16];
        for (q, (lam, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
            let qp = QuadPoint { cell: k, index: q, lambda: lam, vertices };
            let c = coeff(&qp);
            if !c.is_finite() {
                bad.fetch_min(k, std::sync::atomic::Ordering::Relaxed);
            }
            let wc = w * vol * c;
            for i in 0..nb {
                for j in 0..nb {
                    loc[4 * i + j] += wc * lam[i] * lam[j];
                }
            }
        }
        loc
    });
    let k = bad.into_inner();
    if k != usize::MAX {
        return Err(Error::Assembly(format!("coefficient is not finite in cell {k}")));
    }
    Ok(m)
}

/// `b_i = Q[f chi_i]` with the space's fixed rule.
pub fn load<F>(space: &FeSpace, f: F) -> Result<Vec<f64>>
where
    F: Fn(&QuadPoint) -> f64 + Sync,
{
    let mesh = space.mesh();
    let rule = space.rule();
    let nb = mesh.dim() + 1;
    let scale = 1.0 / rule.reference_volume();
    let b = assemble_vector(mesh, |k| {
        let vertices = mesh.cell(k);
        let vol = mesh.cell_volume(k) * scale;
        let mut loc = [0.0; 4];
        for (q, (lam, &w)) in rule.points().iter().zip(rule.weights()).enumerate() {
            let qp = QuadPoint { cell: k, index: q, lambda: lam, vertices };
            let wf = w * vol * f(&qp);
            for i in 0..nb {
                loc[i] += wf * lam[i];
            }
        }
        loc
    });
    if let Some(i) = b.iter().position(|v| !v.is_finite()) {
        let cell = mesh.cells().position(|c| c.contains(&i)).unwrap_or(0);
        check_finite(b[i], cell, "load integrand")?;
    }
    Ok(b)
}

/// `b_i = Q[g(u) chi_i]`. Its Jacobian with respect to the nodal values of
/// `u` is `weighted_mass(space, g'(u))`.
pub fn nonlinear_load<G>(space: &FeSpace, g: G, field: &NodalField) -> Result<Vec<f64>>
where
    G: Fn(f64) -> f64 + Sync,
{
    field.check_on(space.mesh())?;
    let u = field.values();
    load(space, |qp| g(qp.eval(u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_box_mesh, Mesh, NO_CELL};

    fn unit_triangle() -> Mesh {
        Mesh::from_cells(
            2,
            [0.0; 3],
            [1.0, 1.0, 0.0],
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2, NO_CELL]],
            vec![0],
        )
        .unwrap()
    }

    #[test]
    fn unit_triangle_element_matrices() {
        let m = unit_triangle();
        let mass = mass_matrix(&m).unwrap().to_dense();
        let k = stiffness_matrix(&m).unwrap().to_dense();
        let em = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        let ek = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((mass[i][j] - em[i][j] / 24.0).abs() < 1e-15);
                assert!((k[i][j] - ek[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_sums_to_volume_and_constants_in_stiffness_kernel() {
        for (dim, n) in [(2, 5), (3, 3)] {
            let m = make_box_mesh(dim, &vec![-5.0; dim], &vec![5.0; dim], &vec![n; dim]).unwrap();
            let mass = mass_matrix(&m).unwrap();
            let total: f64 = mass.values().iter().sum();
            assert!((total - m.total_volume()).abs() < 1e-10 * total);
            let k = stiffness_matrix(&m).unwrap();
            let ones = vec![1.0; m.num_vertices()];
            assert!(k.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn weighted_mass_unit_coefficient_matches_mass() {
        for dim in [2, 3] {
            let space = FeSpace::from_mesh(make_box_mesh(dim, &vec![0.0; dim], &vec![1.0; dim], &vec![3; dim]).unwrap()).unwrap();
            let w = weighted_mass(&space, |_| 1.0).unwrap();
            for (a, b) in w.values().iter().zip(space.mass().values()) {
                assert!((a - b).abs() < 1e-14);
            }
            let z = weighted_mass(&space, |_| 0.0).unwrap();
            assert!(z.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn nan_coefficient_rejected() {
        let space = FeSpace::from_mesh(make_box_mesh(2, &[0.0; 2], &[1.0; 2], &[2, 2]).unwrap()).unwrap();
        let err = weighted_mass(&space, |qp| if qp.cell == 3 { f64::NAN } else { 1.0 }).unwrap_err();
        assert!(matches!(err, Error::Assembly(msg) if msg.contains("cell 3")));
        let f = space.constant(0.5);
        assert!(nonlinear_load(&space, |_| f64::NAN, &f).is_err());
    }

    #[test]
    fn loads_of_one_and_identity() {
        let space = FeSpace::from_mesh(make_box_mesh(2, &[-5.0; 2], &[5.0; 2], &[4, 4]).unwrap()).unwrap();
        let u = space.interpolate(|x| (x[0] * 0.3).sin() + 0.1 * x[1]);
        let b1 = nonlinear_load(&space, |_| 1.0, &u).unwrap();
        for (a, b) in b1.iter().zip(space.lumped_volumes()) {
            assert!((a - b).abs() < 1e-14);
        }
        let bu = nonlinear_load(&space, |s| s, &u).unwrap();
        let mu = space.mass().mul_vec(u.values());
        for (a, b) in bu.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn field_on_wrong_mesh_rejected() {
        let a = FeSpace::from_mesh(make_box_mesh(2, &[0.0; 2], &[1.0; 2], &[2, 2]).unwrap()).unwrap();
        let b = FeSpace::from_mesh(make_box_mesh(2, &[0.0; 2], &[1.0; 2], &[2, 2]).unwrap()).unwrap();
        assert!(nonlinear_load(&a, |s| s, &b.zeros()).is_err());
        assert!(a.l2_inner(&a.zeros(), &b.zeros()).is_err());
    }

    #[test]
    fn l2_inner_examples() {
        let space = FeSpace::from_mesh(make_box_mesh(2, &[-5.0; 2], &[5.0; 2], &[6, 6]).unwrap()).unwrap();
        let one = space.constant(1.0);
        assert!((space.l2_inner(&one, &one).unwrap() - 100.0).abs() < 1e-12);
        let hat = |v: usize| {
            let mut x = vec![0.0; space.ndofs()];
            x[v] = 1.0;
            space.field(x).unwrap()
        };
        // vertices 0 and 3 on the bottom row share no cell
        assert_eq!(space.l2_inner(&hat(0), &hat(3)).unwrap(), 0.0);
    }
}
