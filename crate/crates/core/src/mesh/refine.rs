//! Newest-vertex bisection with conforming closure (2D).

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

use super::{Mesh, NO_CELL};

fn edge(a: usize, b: usize) -> (usize, usize) {
    if a < b { (a, b) } else { (b, a) }
}

/// Bisects every marked cell at least once, plus whatever closure refinement
/// is needed to avoid hanging vertices.
pub fn refine(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    if marked.is_empty() {
        return Ok(mesh.clone());
    }
    if mesh.dim() != 2 {
        return Err(Error::Unsupported("adaptive refinement is only available in 2D; use a uniform mesh in 3D".into()));
    }
    if let Some(&k) = marked.iter().find(|&&k| k >= mesh.num_cells()) {
        return Err(Error::Config(format!("marked cell {k} does not exist")));
    }

    let cells: Vec<[usize; 3]> = mesh.cells().map(|c| [c[0], c[1], c[2]]).collect();
    let mut split: HashSet<(usize, usize)> = marked.iter().map(|&k| edge(cells[k][0], cells[k][1])).collect();

    // closure: a cell with any split edge must split its refinement edge
    let mut edge_cells: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (k, c) in cells.iter().enumerate() {
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
            edge_cells.entry(edge(a, b)).or_default().push(k);
        }
    }
    let mut work: Vec<(usize, usize)> = {
        let mut w: Vec<_> = split.iter().copied().collect();
        w.sort_unstable();
        w
    };
    while let Some(e) = work.pop() {
        for &k in &edge_cells[&e] {
            let r = edge(cells[k][0], cells[k][1]);
            if split.insert(r) {
                work.push(r);
            }
        }
    }

    // midpoints, numbered in cell/edge order for reproducibility
    let mut coords: Vec<[f64; 3]> = (0..mesh.num_vertices()).map(|v| {
        let x = mesh.vertex(v);
        [x[0], x[1], 0.0]
    }).collect();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::with_capacity(split.len());
    for c in &cells {
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
            let e = edge(a, b);
            if split.contains(&e) && !midpoint.contains_key(&e) {
                let (pa, pb) = (coords[a], coords[b]);
                midpoint.insert(e, coords.len());
                coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1]), 0.0]);
            }
        }
    }

    let mut out_cells = Vec::with_capacity(cells.len() + 2 * split.len());
    let mut out_gen = Vec::with_capacity(out_cells.capacity());
    for (k, c) in cells.iter().enumerate() {
        bisect(*c, mesh.generation(k), &midpoint, &mut out_cells, &mut out_gen);
    }
    let (lo, hi) = mesh.bounds();
    Mesh::from_cells(2, [lo[0], lo[1], 0.0], [hi[0], hi[1], 0.0], coords, out_cells, out_gen)
}

fn bisect(
    c: [usize; 3],
    generation: u32,
    midpoint: &HashMap<(usize, usize), usize>,
    cells: &mut Vec<[usize; 4]>,
    gens: &mut Vec<u32>,
) {
    match midpoint.get(&edge(c[0], c[1])) {
        Some(&m) => {
            bisect([c[2], c[0], m], generation + 1, midpoint, cells, gens);
            bisect([c[1], c[2], m], generation + 1, midpoint, cells, gens);
        }
        None => {
            cells.push([c[0], c[1], c[2], NO_CELL]);
            gens.push(generation);
        }
    }
}

/// [`refine`] restricted to marked cells below `max_generation`.
pub fn refine_capped(mesh: &Mesh, marked: &[usize], max_generation: u32) -> Result<Mesh> {
    let eligible: Vec<usize> = marked.iter().copied().filter(|&k| mesh.generation(k) < max_generation).collect();
    refine(mesh, &eligible)
}
