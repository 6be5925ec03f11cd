use crate::error::{Error, Result};
use crate::field::NodalField;

use super::Mesh;

/// Per-cell error indicator values, all non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicator {
    values: Vec<f64>,
}

impl ErrorIndicator {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config(format!("indicator entry {k} = {} is not a finite non-negative value", values[k])));
        }
        Ok(ErrorIndicator { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn cell_gradient(mesh: &Mesh, k: usize, u: &[f64]) -> [f64; 3] {
    let geo = mesh.geometry(k);
    let mut g = [0.0; 3];
    for (i, &v) in mesh.cell(k).iter().enumerate() {
        for d in 0..3 {
            g[d] += u[v] * geo.grads[i][d];
        }
    }
    g
}

/// Unit normal, measure and diameter of a facet.
fn facet_frame(mesh: &Mesh, vertices: &[usize]) -> ([f64; 3], f64, f64) {
    let p: Vec<&[f64]> = vertices.iter().map(|&v| mesh.vertex(v)).collect();
    let sub = |a: &[f64], b: &[f64]| -> [f64; 3] {
        let mut r = [0.0; 3];
        for d in 0..a.len() {
            r[d] = a[d] - b[d];
        }
        r
    };
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if mesh.dim() == 2 {
        let t = sub(p[1], p[0]);
        let len = norm(t);
        ([t[1] / len, -t[0] / len, 0.0], len, len)
    } else {
        let a = sub(p[1], p[0]);
        let b = sub(p[2], p[0]);
        let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let twice_area = norm(c);
        let diam = norm(a).max(norm(b)).max(norm(sub(p[2], p[1])));
        (c.map(|x| x / twice_area), 0.5 * twice_area, diam)
    }
}

/// Facet-weighted jump estimator of a P1 field:
/// `eta_K^2 = sum_{e in K} h_e |e| [grad u . n_e]^2` over interior facets.
pub fn jump_indicator(mesh: &Mesh, field: &NodalField) -> Result<ErrorIndicator> {
    field.check_on(mesh)?;
    let u = field.values();
    let grads: Vec<[f64; 3]> = (0..mesh.num_cells()).map(|k| cell_gradient(mesh, k, u)).collect();
    let mut eta2 = vec![0.0; mesh.num_cells()];
    for facet in mesh.facets() {
        if facet.is_boundary() {
            continue;
        }
        let [k1, k2] = facet.cells;
        let (n, measure, diam) = facet_frame(mesh, &facet.vertices[..mesh.dim()]);
        let jump: f64 = (0..3).map(|d| (grads[k1][d] - grads[k2][d]) * n[d]).sum();
        let contribution = diam * measure * jump * jump;
        eta2[k1] += contribution;
        eta2[k2] += contribution;
    }
    ErrorIndicator::new(eta2.into_iter().map(f64::sqrt).collect())
}

/// Smallest set of cells carrying a `theta` fraction of the total squared
/// indicator, chosen greedily by decreasing value (ties to the lower index).
/// Returned in ascending cell order.
pub fn doerfler_mark(indicator: &ErrorIndicator, theta: f64) -> Result<Vec<usize>> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Config(format!("Doerfler fraction must lie in (0, 1], got {theta}")));
    }
    let eta = indicator.values();
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let total: f64 = order.iter().map(|&k| eta[k] * eta[k]).sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let target = theta * total;
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for &k in &order {
        if acc >= target {
            break;
        }
        acc += eta[k] * eta[k];
        marked.push(k);
    }
    marked.sort_unstable();
    Ok(marked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_box_mesh;

    fn ind(v: &[f64]) -> ErrorIndicator {
        ErrorIndicator::new(v.to_vec()).unwrap()
    }

    #[test]
    fn doerfler_examples() {
        assert_eq!(doerfler_mark(&ind(&[3.0, 2.0, 1.0]), 0.5).unwrap(), vec![0]);
        assert_eq!(doerfler_mark(&ind(&[1.0; 4]), 1.0).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(doerfler_mark(&ind(&[4.0, 3.0, 2.0, 1.0]), 0.5).unwrap(), vec![0]);
        assert_eq!(doerfler_mark(&ind(&[1.0, 4.0, 1.0]), 0.5).unwrap(), vec![1]);
        assert!(doerfler_mark(&ind(&[0.0; 5]), 0.7).unwrap().is_empty());
    }

    #[test]
    fn doerfler_ties_prefer_lower_index() {
        assert_eq!(doerfler_mark(&ind(&[1.0, 2.0, 2.0, 1.0]), 0.3).unwrap(), vec![1]);
    }

    #[test]
    fn doerfler_rejects_bad_theta() {
        assert!(doerfler_mark(&ind(&[1.0]), 0.0).is_err());
        assert!(doerfler_mark(&ind(&[1.0]), 1.5).is_err());
    }

    #[test]
    fn negative_indicator_rejected() {
        assert!(ErrorIndicator::new(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn affine_and_constant_fields_have_no_jumps() {
        for dim in [2, 3] {
            let m = make_box_mesh(dim, &vec![-1.0; dim], &vec![2.0; dim], &vec![3; dim]).unwrap();
            let affine = NodalField::from_fn(&m, |x| 0.3 + 1.7 * x[0] - 0.4 * x[1] + if dim == 3 { 2.0 * x[2] } else { 0.0 });
            for f in [NodalField::constant(&m, 4.2), affine] {
                let eta = jump_indicator(&m, &f).unwrap();
                assert!(eta.values().iter().all(|&e| e < 1e-12), "{:?}", eta.values());
            }
        }
    }

    #[test]
    fn hat_on_diagonal_vertex_by_hand() {
        // Unit square: gradients (-1,0) and (0,-1) for the hat at the origin;
        // jump across the diagonal is -sqrt2, |e| = h_e = sqrt2, so eta^2 = 4.
        let m = make_box_mesh(2, &[0.0, 0.0], &[1.0, 1.0], &[1, 1]).unwrap();
        let hat = NodalField::from_fn(&m, |x| if x[0] == 0.0 && x[1] == 0.0 { 1.0 } else { 0.0 });
        let eta = jump_indicator(&m, &hat).unwrap();
        for &e in eta.values() {
            assert!((e - 2.0).abs() < 1e-14);
        }
        // hat at the lower-right corner lives on one cell only: gradient (1,-1)
        // there and 0 on the other, jump sqrt2, eta^2 = sqrt2 * sqrt2 * 2 = 4
        let corner = NodalField::from_fn(&m, |x| if x[0] == 1.0 && x[1] == 0.0 { 1.0 } else { 0.0 });
        let eta = jump_indicator(&m, &corner).unwrap();
        for &e in eta.values() {
            assert!((e * e - 4.0).abs() < 1e-13);
        }
    }
}
