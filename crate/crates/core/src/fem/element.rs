//! Affine element maps and the geometric quantities used by the bound constants.

use crate::error::{Error, Result};

/// Local facet `i` of a triangle is opposite local vertex `i`.
pub const LOCAL_FACETS: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// Reference-triangle vertices.
pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// `x = v0 + J ξ` with `J = [v1 - v0 | v2 - v0]`.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: v[0],
            jac,
            det,
            inv,
        }
    }

    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient: `J^{-T} ∇̂`.
    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub vertices: [[f64; 2]; 3],
    pub map: AffineMap,
    pub area: f64,
    /// Largest pairwise vertex distance.
    pub diameter: f64,
    /// Length of local facet `i`.
    pub facet_length: [f64; 3],
    /// `max_{x ∈ e_i} |x − x_i|` with `x_i` the vertex opposite facet `i`.
    pub opposite_distance: [f64; 3],
    /// Outward unit normal of local facet `i`.
    pub normal: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(vertices: [[f64; 2]; 3]) -> Result<Self> {
        let map = AffineMap::new(vertices);
        let area = 0.5 * map.det;
        if !(area > 0.0) || !area.is_finite() {
            return Err(Error::Mesh(format!(
                "element with vertices {vertices:?} has non-positive area {area}"
            )));
        }
        let mut facet_length = [0.0; 3];
        let mut opposite_distance = [0.0; 3];
        let mut normal = [[0.0; 2]; 3];
        for (i, [a, b]) in LOCAL_FACETS.iter().copied().enumerate() {
            let (pa, pb) = (vertices[a], vertices[b]);
            let len = dist(pa, pb);
            facet_length[i] = len;
            // Counter-clockwise ordering puts the outward normal to the right of a→b.
            normal[i] = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
            opposite_distance[i] = dist(vertices[i], pa).max(dist(vertices[i], pb));
        }
        let diameter = facet_length.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            vertices,
            map,
            area,
            diameter,
            facet_length,
            opposite_distance,
            normal,
        })
    }

    pub fn centroid(&self) -> [f64; 2] {
        let v = &self.vertices;
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }
}

/// Poincaré and trace constants `(C1, C2)` for facet `facet` of `geo`.
pub fn poincare_constants(geo: &ElementGeometry, facet: usize) -> (f64, f64) {
    let d = 2.0;
    let c1 = geo.diameter / std::f64::consts::PI;
    let c2 = (geo.facet_length[facet] / (d * geo.area)
        * c1
        * (2.0 * geo.opposite_distance[facet] + d * c1))
        .sqrt();
    (c1, c2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn unit_right_triangle_constants() {
        let g = ElementGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        // Hypotenuse is opposite vertex 0.
        let (c1, c2) = poincare_constants(&g, 0);
        assert_relative_eq!(c1, 2f64.sqrt() / PI, epsilon = 1e-15);
        let expect = (4.0 / PI + 4.0 * 2f64.sqrt() / (PI * PI)).sqrt();
        assert_relative_eq!(c2, expect, epsilon = 1e-14);
        assert!((c2 - 1.3588).abs() < 1e-4);
    }

    #[test]
    fn constants_scale_with_element() {
        let g1 = ElementGeometry::new([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]).unwrap();
        let g2 = ElementGeometry::new([[0.0, 0.0], [2.0, 0.4], [0.6, 1.8]]).unwrap();
        for f in 0..3 {
            let (a1, b1) = poincare_constants(&g1, f);
            let (a2, b2) = poincare_constants(&g2, f);
            assert_relative_eq!(a2, 2.0 * a1, epsilon = 1e-14);
            // C2 is scale invariant up to sqrt(h): |e| h / |K| * h ~ h.
            assert_relative_eq!(b2, 2f64.sqrt() * b1, epsilon = 1e-13);
        }
    }

    #[test]
    fn diameter_pi_gives_unit_c1() {
        let g = ElementGeometry::new([[0.0, 0.0], [PI, 0.0], [0.5, 1.0]]).unwrap();
        assert_relative_eq!(poincare_constants(&g, 0).0, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clockwise_element_rejected() {
        assert!(ElementGeometry::new([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn normals_point_outward() {
        let g = ElementGeometry::new([[0.2, 0.1], [1.3, 0.4], [0.5, 1.2]]).unwrap();
        let c = g.centroid();
        for (i, [a, _]) in LOCAL_FACETS.iter().enumerate() {
            let p = g.vertices[*a];
            let to_out = [p[0] - c[0], p[1] - c[1]];
            assert!(to_out[0] * g.normal[i][0] + to_out[1] * g.normal[i][1] > 0.0);
        }
        let r = g.map.to_reference(g.map.to_physical([0.3, 0.4]));
        assert_relative_eq!(r[0], 0.3, epsilon = 1e-14);
        assert_relative_eq!(r[1], 0.4, epsilon = 1e-14);
    }
}
