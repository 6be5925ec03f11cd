//! Symmetric quadrature rules on the reference simplex with positive weights.

use crate::scalar::Scalar;

/// Barycentric points and weights. Weights sum to the reference-simplex
/// volume (1/2 for the triangle, 1/6 for the tetrahedron).
#[derive(Debug, Clone)]
pub struct QuadratureRule<S> {
    dim: usize,
    degree: usize,
    points: Vec<[S; 4]>,
    weights: Vec<S>,
}

impl<S: Scalar> QuadratureRule<S> {
    /// Six-point rule, exact for degree 4 on triangles.
    pub fn triangle_degree4() -> Self {
        const GROUPS: [(f64, f64); 2] = [
            (0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70),
            (0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64),
        ];
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in GROUPS {
            for i in 0..3 {
                let mut p = [S::lit(a), S::lit(a), S::lit(a), S::zero()];
                p[i] = S::lit(1.0 - 2.0 * a);
                points.push(p);
                weights.push(S::lit(0.5 * w));
            }
        }
        QuadratureRule { dim: 2, degree: 4, points, weights }
    }

    /// Fourteen-point rule, exact for degree 5 on tetrahedra. Used in place of
    /// the eleven-point degree-4 rule, which has a negative weight.
    pub fn tetrahedron_degree5() -> Self {
        const VERTEX_GROUPS: [(f64, f64); 2] = [
            (0.092_735_250_310_891_226_402_32, 0.073_493_043_116_361_949_543_71),
            (0.310_885_919_263_300_609_797_3, 0.112_687_925_718_015_850_799_2),
        ];
        const EDGE_GROUP: (f64, f64) = (0.045_503_704_125_649_649_491_88, 0.042_546_020_777_081_466_438_07);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in VERTEX_GROUPS {
            for i in 0..4 {
                let mut p = [S::lit(a); 4];
                p[i] = S::lit(1.0 - 3.0 * a);
                points.push(p);
                weights.push(S::lit(w / 6.0));
            }
        }
        let (b, w) = EDGE_GROUP;
        for i in 0..4 {
            for j in i + 1..4 {
                let mut p = [S::lit(b); 4];
                p[i] = S::lit(0.5 - b);
                p[j] = S::lit(0.5 - b);
                points.push(p);
                weights.push(S::lit(w / 6.0));
            }
        }
        QuadratureRule { dim: 3, degree: 5, points, weights }
    }

    /// The fixed rule used for every nonlinear pairing in dimension `dim`.
    pub fn for_dim(dim: usize) -> Self {
        if dim == 2 { Self::triangle_degree4() } else { Self::tetrahedron_degree5() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[S; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn reference_volume(&self) -> S {
        if self.dim == 2 { S::lit(0.5) } else { S::lit(1.0 / 6.0) }
    }

    /// Weights rescaled to fractions of the cell volume (summing to 1).
    pub fn volume_fractions(&self) -> Vec<S> {
        let v = self.reference_volume();
        self.weights.iter().map(|&w| w / v).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact reference-simplex integral of a barycentric monomial.
    fn exact(dim: usize, e: [u32; 4]) -> f64 {
        let num: f64 = e.iter().map(|&k| factorial(k)).product();
        let total: u32 = e.iter().sum();
        num / factorial(total + dim as u32)
    }

    fn check<S: Scalar>(rule: &QuadratureRule<S>, tol: f64) {
        let nb = rule.dim() + 1;
        for e0 in 0..=rule.degree() as u32 {
            for e1 in 0..=rule.degree() as u32 - e0 {
                for e2 in 0..=rule.degree() as u32 - e0 - e1 {
                    let e3max = if nb == 4 { rule.degree() as u32 - e0 - e1 - e2 } else { 0 };
                    for e3 in 0..=e3max {
                        let e = [e0, e1, e2, e3];
                        let q: f64 = rule
                            .points()
                            .iter()
                            .zip(rule.weights())
                            .map(|(p, &w)| {
                                w.to_f64().unwrap()
                                    * (0..nb).map(|i| p[i].to_f64().unwrap().powi(e[i] as i32)).product::<f64>()
                            })
                            .sum();
                        let ex = exact(rule.dim(), e);
                        assert!((q - ex).abs() <= tol * ex, "{:?}: {q} vs {ex}", e);
                    }
                }
            }
        }
    }

    #[test]
    fn triangle_rule_exact_to_degree_4() {
        check(&QuadratureRule::<f64>::triangle_degree4(), 1e-14);
        check(&QuadratureRule::<f32>::triangle_degree4(), 1e-6);
    }

    #[test]
    fn tetrahedron_rule_exact_to_degree_5() {
        check(&QuadratureRule::<f64>::tetrahedron_degree5(), 1e-13);
    }

    #[test]
    fn weights_positive_and_points_barycentric() {
        for rule in [QuadratureRule::<f64>::for_dim(2), QuadratureRule::<f64>::for_dim(3)] {
            assert!(rule.weights().iter().all(|&w| w > 0.0));
            let sum: f64 = rule.weights().iter().sum();
            assert!((sum - rule.reference_volume()).abs() < 1e-15);
            for p in rule.points() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }
}
