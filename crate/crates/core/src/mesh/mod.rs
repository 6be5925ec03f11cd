//! Simplicial meshes of axis-aligned boxes.
//!
//! Cells are stored as vertex tuples with positive orientation. In 2D the
//! first two vertices of a triangle span its refinement edge and the third is
//! its newest vertex; bisection preserves that convention.

mod indicator;
mod refine;
mod transfer;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

pub use indicator::{doerfler_mark, jump_indicator, ErrorIndicator};
pub use refine::{refine, refine_capped};
pub use transfer::{transfer, PointLocator};

/// Marker for the missing neighbour of a boundary facet.
pub const NO_CELL: usize = usize::MAX;

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a mesh instance; fields carry it to catch mismatches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshId(u64);

impl MeshId {
    fn fresh() -> Self {
        MeshId(NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Sorted vertex indices; `dim` of them are meaningful.
    pub vertices: [usize; 3],
    /// Adjacent cells; the second is [`NO_CELL`] on the boundary.
    pub cells: [usize; 2],
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.cells[1] == NO_CELL
    }
}

/// Volume and barycentric-coordinate gradients of one cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub volume: f64,
    /// Gradient of the i-th barycentric coordinate; only `dim + 1` rows and
    /// `dim` columns are meaningful.
    pub grads: [[f64; 3]; 4],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    id: MeshId,
    dim: usize,
    lower: [f64; 3],
    upper: [f64; 3],
    coords: Vec<[f64; 3]>,
    cells: Vec<[usize; 4]>,
    generation: Vec<u32>,
    geometry: Vec<CellGeometry>,
    facets: Vec<Facet>,
    cell_facets: Vec<[usize; 4]>,
}

impl Mesh {
    /// Builds a mesh from raw connectivity, validating orientation and
    /// facet adjacency.
    pub fn from_cells(
        dim: usize,
        lower: [f64; 3],
        upper: [f64; 3],
        coords: Vec<[f64; 3]>,
        cells: Vec<[usize; 4]>,
        generation: Vec<u32>,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("mesh dimension must be 2 or 3, got {dim}")));
        }
        if generation.len() != cells.len() {
            return Err(Error::Dimension("generation length differs from cell count".into()));
        }
        let n_vertices = coords.len();
        let mut geometry = Vec::with_capacity(cells.len());
        for (k, cell) in cells.iter().enumerate() {
            if cell[..=dim].iter().any(|&v| v >= n_vertices) {
                return Err(Error::Geometry(format!("cell {k} references a missing vertex")));
            }
            let geo = cell_geometry(dim, &coords, &cell[..=dim]);
            if !(geo.volume > 0.0) {
                return Err(Error::DegenerateCell { cell: k, volume: geo.volume });
            }
            geometry.push(geo);
        }
        let (facets, cell_facets) = build_facets(dim, &cells)?;
        Ok(Mesh {
            id: MeshId::fresh(),
            dim,
            lower,
            upper,
            coords,
            cells,
            generation,
            geometry,
            facets,
            cell_facets,
        })
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Coordinates of vertex `v` (`dim` entries).
    pub fn vertex(&self, v: usize) -> &[f64] {
        &self.coords[v][..self.dim]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.iter().map(move |c| &c[..self.dim])
    }

    /// Vertex indices of cell `k` (`dim + 1` entries).
    pub fn cell(&self, k: usize) -> &[usize] {
        &self.cells[k][..=self.dim]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.iter().map(move |c| &c[..=self.dim])
    }

    pub fn geometry(&self, k: usize) -> &CellGeometry {
        &self.geometry[k]
    }

    pub fn cell_volume(&self, k: usize) -> f64 {
        self.geometry[k].volume
    }

    pub fn generation(&self, k: usize) -> u32 {
        self.generation[k]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Facet indices of cell `k`; facet `i` is opposite local vertex `i`.
    pub fn cell_facets(&self, k: usize) -> &[usize] {
        &self.cell_facets[k][..=self.dim]
    }

    pub fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lower[..self.dim], &self.upper[..self.dim])
    }

    pub fn total_volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Diagonal of the declared box.
    pub fn diameter(&self) -> f64 {
        (0..self.dim).map(|i| (self.upper[i] - self.lower[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Longest edge over all cells.
    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.num_cells()).map(|k| self.cell_diameter(k)).fold(0.0, f64::max)
    }

    pub fn cell_diameter(&self, k: usize) -> f64 {
        let cell = self.cell(k);
        let mut h: f64 = 0.0;
        for a in 0..cell.len() {
            for b in a + 1..cell.len() {
                h = h.max(distance(self.vertex(cell[a]), self.vertex(cell[b])));
            }
        }
        h
    }

    pub fn cell_centroid(&self, k: usize) -> [f64; 3] {
        let cell = self.cell(k);
        let mut c = [0.0; 3];
        for &v in cell {
            for (ci, xi) in c.iter_mut().zip(self.vertex(v)) {
                *ci += xi;
            }
        }
        c.map(|x| x / cell.len() as f64)
    }

    /// Barycentric coordinates of `x` with respect to cell `k`.
    pub fn barycentric(&self, k: usize, x: &[f64]) -> [f64; 4] {
        let geo = &self.geometry[k];
        let cell = self.cell(k);
        let x0 = self.vertex(cell[0]);
        let mut lam = [0.0; 4];
        let mut rest = 1.0;
        for i in 1..=self.dim {
            let g = &geo.grads[i];
            lam[i] = (0..self.dim).map(|d| g[d] * (x[d] - x0[d])).sum();
            rest -= lam[i];
        }
        lam[0] = rest;
        lam
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Volume and barycentric gradients of a simplex, via the inverse Jacobian of
/// the affine map from the reference simplex.
pub(crate) fn cell_geometry(dim: usize, coords: &[[f64; 3]], cell: &[usize]) -> CellGeometry {
    let x0 = coords[cell[0]];
    let mut grads = [[0.0; 3]; 4];
    let volume;
    if dim == 2 {
        let a = [coords[cell[1]][0] - x0[0], coords[cell[1]][1] - x0[1]];
        let b = [coords[cell[2]][0] - x0[0], coords[cell[2]][1] - x0[1]];
        let det = a[0] * b[1] - a[1] * b[0];
        volume = 0.5 * det;
        // rows of J^{-1}, J = [a b]
        grads[1] = [b[1] / det, -b[0] / det, 0.0];
        grads[2] = [-a[1] / det, a[0] / det, 0.0];
    } else {
        let e: [[f64; 3]; 3] = std::array::from_fn(|i| {
            let p = coords[cell[i + 1]];
            [p[0] - x0[0], p[1] - x0[1], p[2] - x0[2]]
        });
        // J has columns e[0], e[1], e[2]; rows of J^{-1} are cross products / det
        let cross = |u: [f64; 3], v: [f64; 3]| {
            [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
        };
        let c12 = cross(e[1], e[2]);
        let det = e[0][0] * c12[0] + e[0][1] * c12[1] + e[0][2] * c12[2];
        volume = det / 6.0;
        let c20 = cross(e[2], e[0]);
        let c01 = cross(e[0], e[1]);
        grads[1] = c12.map(|x| x / det);
        grads[2] = c20.map(|x| x / det);
        grads[3] = c01.map(|x| x / det);
    }
    for d in 0..3 {
        grads[0][d] = -(grads[1][d] + grads[2][d] + grads[3][d]);
    }
    CellGeometry { volume, grads }
}

fn build_facets(dim: usize, cells: &[[usize; 4]]) -> Result<(Vec<Facet>, Vec<[usize; 4]>)> {
    let mut index: HashMap<[usize; 3], usize> = HashMap::with_capacity(cells.len() * 2);
    let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 2);
    let mut cell_facets = vec![[NO_CELL; 4]; cells.len()];
    for (k, cell) in cells.iter().enumerate() {
        for i in 0..=dim {
            let mut key = [NO_CELL; 3];
            let mut j = 0;
            for (l, &v) in cell[..=dim].iter().enumerate() {
                if l != i {
                    key[j] = v;
                    j += 1;
                }
            }
            key[..dim].sort_unstable();
            let f = match index.get(&key) {
                Some(&f) => {
                    let facet = &mut facets[f];
                    if facet.cells[1] != NO_CELL {
                        return Err(Error::Geometry(format!(
                            "facet {:?} shared by more than two cells",
                            &key[..dim]
                        )));
                    }
                    facet.cells[1] = k;
                    f
                }
                None => {
                    let f = facets.len();
                    facets.push(Facet { vertices: key, cells: [k, NO_CELL] });
                    index.insert(key, f);
                    f
                }
            };
            cell_facets[k][i] = f;
        }
    }
    Ok((facets, cell_facets))
}

/// Structured simplicial mesh of the box `[lower, upper]` with `n[i]` cells
/// per axis. Squares are split along the lower-left to upper-right diagonal;
/// cubes into the six Kuhn tetrahedra sharing the main diagonal.
pub fn make_box_mesh(dim: usize, lower: &[f64], upper: &[f64], n: &[usize]) -> Result<Mesh> {
    if dim != 2 && dim != 3 {
        return Err(Error::Config(format!("mesh dimension must be 2 or 3, got {dim}")));
    }
    if lower.len() != dim || upper.len() != dim || n.len() != dim {
        return Err(Error::Config("box bounds and resolution must have one entry per axis".into()));
    }
    for i in 0..dim {
        if !(lower[i] < upper[i]) {
            return Err(Error::Config(format!(
                "invalid box: lower[{i}] = {} is not below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        if n[i] == 0 {
            return Err(Error::Config(format!("cells per axis must be at least 1 (axis {i})")));
        }
    }
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    lo[..dim].copy_from_slice(lower);
    hi[..dim].copy_from_slice(upper);
    let coord = |axis: usize, i: usize| {
        if i == n[axis] {
            upper[axis]
        } else {
            lower[axis] + (upper[axis] - lower[axis]) * i as f64 / n[axis] as f64
        }
    };

    let mut coords = Vec::new();
    let mut cells = Vec::new();
    if dim == 2 {
        let (nx, ny) = (n[0], n[1]);
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([coord(0, i), coord(1, j), 0.0]);
            }
        }
        let v = |i: usize, j: usize| i + j * (nx + 1);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1));
                // refinement edge = diagonal a-c, newest vertex = right-angle corner
                cells.push([c, a, b, NO_CELL]);
                cells.push([a, c, d, NO_CELL]);
            }
        }
    } else {
        let (nx, ny, nz) = (n[0], n[1], n[2]);
        for k in 0..=nz {
            for j in 0..=ny {
                for i in 0..=nx {
                    coords.push([coord(0, i), coord(1, j), coord(2, k)]);
                }
            }
        }
        let v = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
        const PERMS: [[usize; 3]; 6] =
            [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    for perm in PERMS {
                        let mut p = [i, j, k];
                        let mut tet = [v(i, j, k), 0, 0, 0];
                        for (s, &axis) in perm.iter().enumerate() {
                            p[axis] += 1;
                            tet[s + 1] = v(p[0], p[1], p[2]);
                        }
                        let geo = cell_geometry(3, &coords, &tet);
                        if geo.volume < 0.0 {
                            tet.swap(2, 3);
                        }
                        cells.push(tet);
                    }
                }
            }
        }
    }
    let generation = vec![0; cells.len()];
    Mesh::from_cells(dim, lo, hi, coords, cells, generation)
}
