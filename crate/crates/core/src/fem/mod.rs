//! P1 finite elements: quadrature, sparse storage, assembly and norms.

mod assembly;
mod quadrature;
mod sparse;

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::linalg::DirectSolver;
use crate::mesh::Mesh;

pub use assembly::{load, mass_matrix, nonlinear_load, stiffness_matrix, weighted_mass, QuadPoint};
pub use quadrature::QuadratureRule;
pub use sparse::{Pattern, SparseMatrix};

/// A P1 space on one mesh with its cached operators.
///
/// All matrices assembled through a space share its vertex-adjacency
/// pattern, so they can be combined entrywise.
pub struct FeSpace {
    mesh: Arc<Mesh>,
    pattern: Arc<Pattern>,
    rule: QuadratureRule<f64>,
    /// Storage offset of local entry (i, j) for each cell, row-major `4 x 4`.
    cell_offsets: Vec<[usize; 16]>,
    mass: SparseMatrix<f64>,
    stiffness: SparseMatrix<f64>,
    lumped: Vec<f64>,
    mass_solver: OnceLock<DirectSolver>,
}

impl std::fmt::Debug for FeSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeSpace")
            .field("vertices", &self.mesh.num_vertices())
            .field("cells", &self.mesh.num_cells())
            .finish()
    }
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let (pattern, cell_offsets) = assembly::vertex_pattern(&mesh)?;
        let mass = assembly::exact_mass(&mesh, &pattern, &cell_offsets)?;
        let stiffness = assembly::exact_stiffness(&mesh, &pattern, &cell_offsets)?;
        let lumped = mass.row_sums();
        Ok(FeSpace {
            rule: QuadratureRule::for_dim(mesh.dim()),
            mesh,
            pattern,
            cell_offsets,
            mass,
            stiffness,
            lumped,
            mass_solver: OnceLock::new(),
        })
    }

    pub fn from_mesh(mesh: Mesh) -> Result<Self> {
        Self::new(Arc::new(mesh))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn ndofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn rule(&self) -> &QuadratureRule<f64> {
        &self.rule
    }

    pub(crate) fn cell_offsets(&self) -> &[[usize; 16]] {
        &self.cell_offsets
    }

    /// Consistent mass matrix.
    pub fn mass(&self) -> &SparseMatrix<f64> {
        &self.mass
    }

    /// Stiffness matrix of the Neumann Laplacian.
    pub fn stiffness(&self) -> &SparseMatrix<f64> {
        &self.stiffness
    }

    /// Row sums of the mass matrix (integrals of the hat functions).
    pub fn lumped_volumes(&self) -> &[f64] {
        &self.lumped
    }

    pub fn zeros(&self) -> NodalField {
        NodalField::zeros(&self.mesh)
    }

    pub fn constant(&self, c: f64) -> NodalField {
        NodalField::constant(&self.mesh, c)
    }

    pub fn field(&self, values: Vec<f64>) -> Result<NodalField> {
        NodalField::new(&self.mesh, values)
    }

    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> NodalField {
        NodalField::from_fn(&self.mesh, f)
    }

    /// `a^T M b`.
    pub fn l2_inner(&self, a: &NodalField, b: &NodalField) -> Result<f64> {
        l2_inner(&self.mass, a, b)
    }

    pub fn l2_norm(&self, a: &NodalField) -> Result<f64> {
        Ok(self.l2_inner(a, a)?.max(0.0).sqrt())
    }

    pub fn integral(&self, a: &NodalField) -> Result<f64> {
        a.check_on(&self.mesh)?;
        Ok(self.lumped.iter().zip(a.values()).map(|(w, v)| w * v).sum())
    }

    /// Solves `M x = b`; the factorization is computed once per space.
    pub fn solve_mass(&self, b: &[f64]) -> Result<Vec<f64>> {
        if self.mass_solver.get().is_none() {
            let solver = DirectSolver::factorize(&self.mass)?;
            let _ = self.mass_solver.set(solver);
        }
        self.mass_solver.get().expect("mass factorization").solve(b)
    }

    /// L2 Riesz representative of a dual vector (a functional tested with
    /// the hat functions).
    pub fn riesz(&self, dual: &[f64]) -> Result<NodalField> {
        let x = self.solve_mass(dual)?;
        self.field(x)
    }
}

/// `a^T M b` for fields conforming to `m`.
pub fn l2_inner(m: &SparseMatrix<f64>, a: &NodalField, b: &NodalField) -> Result<f64> {
    if a.len() != m.ncols() || b.len() != m.nrows() {
        return Err(Error::Dimension(format!(
            "inner product of fields of length {} and {} with a {}x{} matrix",
            a.len(),
            b.len(),
            m.nrows(),
            m.ncols()
        )));
    }
    if a.mesh_id() != b.mesh_id() {
        return Err(Error::Dimension("fields live on different meshes".into()));
    }
    Ok(m.inner(a.values(), b.values()))
}

pub fn l2_norm(m: &SparseMatrix<f64>, a: &NodalField) -> Result<f64> {
    Ok(l2_inner(m, a, a)?.max(0.0).sqrt())
}
