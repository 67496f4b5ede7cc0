//! L² projections onto `P^q(K)` and `P^q(e)`.

use super::basis::dim_p;
use super::element::ElementGeometry;
use super::eval::{eval_facet, eval_scalar, ElementQuad, FacetQuad};
use crate::error::{Error, Result};

/// Polynomial on one element, expanded in the orthonormal physical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPoly {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl ScalarPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            coeffs: vec![0.0; dim_p(degree)],
        }
    }

    pub fn eval(&self, geo: &ElementGeometry, x: [f64; 2]) -> f64 {
        eval_scalar(geo, self.degree, &self.coeffs, x)
    }
}

/// `[P^q(K)]²` field, one scalar expansion per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPoly {
    pub degree: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorPoly {
    pub fn zero(degree: usize) -> Self {
        Self {
            degree,
            x: vec![0.0; dim_p(degree)],
            y: vec![0.0; dim_p(degree)],
        }
    }

    pub fn eval(&self, geo: &ElementGeometry, x: [f64; 2]) -> [f64; 2] {
        [
            eval_scalar(geo, self.degree, &self.x, x),
            eval_scalar(geo, self.degree, &self.y, x),
        ]
    }
}

/// Polynomial on a segment `a → b` in the orthonormal Legendre basis.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePoly {
    pub degree: usize,
    pub length: f64,
    pub coeffs: Vec<f64>,
}

impl EdgePoly {
    /// Value at parameter `t ∈ [0, 1]` along the segment.
    pub fn eval(&self, t: f64) -> f64 {
        eval_facet(self.degree, self.length, &self.coeffs, t)
    }
}

pub(crate) fn check_finite(what: &'static str, value: f64, x: [f64; 2]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            what,
            value,
            x: x[0],
            y: x[1],
        })
    }
}

/// `Π_K^q f` computed with a rule of degree `quad_degree`.
pub fn project_element<F: Fn([f64; 2]) -> f64 + ?Sized>(
    f: &F,
    geo: &ElementGeometry,
    q: usize,
    quad_degree: usize,
) -> Result<ScalarPoly> {
    let eq = ElementQuad::new(geo, q, quad_degree.max(2 * q));
    let mut coeffs = vec![0.0; eq.n];
    for k in 0..eq.len() {
        let v = check_finite("projected function", f(eq.points[k]), eq.points[k])?;
        let w = eq.weights[k] * v;
        for (c, b) in coeffs.iter_mut().zip(eq.at(k)) {
            *c += w * b.value;
        }
    }
    Ok(ScalarPoly { degree: q, coeffs })
}

/// `Π_e^q g` on the segment `a → b`.
pub fn project_edge<F: Fn([f64; 2]) -> f64 + ?Sized>(
    g: &F,
    a: [f64; 2],
    b: [f64; 2],
    q: usize,
    quad_degree: usize,
) -> Result<EdgePoly> {
    let rule = super::quadrature::line_rule(quad_degree.max(2 * q));
    let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut coeffs = vec![0.0; q + 1];
    let mut buf = vec![0.0; q + 1];
    let s = 1.0 / length.sqrt();
    for (&t, w) in rule.points.iter().zip(&rule.weights) {
        let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
        let v = check_finite("projected boundary function", g(x), x)?;
        super::basis::orthonormal_segment(q, t, &mut buf);
        for (c, l) in coeffs.iter_mut().zip(&buf) {
            *c += w * length * v * l * s;
        }
    }
    Ok(EdgePoly {
        degree: q,
        length,
        coeffs,
    })
}

/// `‖f − Π_K^q f‖_{L²(K)}` evaluated on the same rule as the projection.
pub fn element_oscillation<F: Fn([f64; 2]) -> f64 + ?Sized>(
    f: &F,
    geo: &ElementGeometry,
    q: usize,
    quad_degree: usize,
) -> Result<f64> {
    let proj = project_element(f, geo, q, quad_degree)?;
    let eq = ElementQuad::new(geo, q, quad_degree.max(2 * q));
    let mut s = 0.0;
    for k in 0..eq.len() {
        let d = f(eq.points[k]) - eq.value(k, &proj.coeffs);
        s += eq.weights[k] * d * d;
    }
    Ok(s.sqrt())
}

/// Moments `⟨g, μ_k⟩_e` of a function against the facet basis, used when the
/// facet quadrature is already tabulated.
pub fn facet_moments<F: Fn([f64; 2]) -> f64 + ?Sized>(g: &F, fq: &FacetQuad) -> Result<Vec<f64>> {
    let mut m = vec![0.0; fq.facet_n];
    for k in 0..fq.len() {
        let v = check_finite("boundary data", g(fq.points[k]), fq.points[k])?;
        for (c, l) in m.iter_mut().zip(fq.facet_at(k)) {
            *c += fq.weights[k] * v * l;
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn reference() -> ElementGeometry {
        ElementGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    #[test]
    fn projecting_x_to_constants_gives_centroid_value() {
        let geo = reference();
        let p = project_element(&|x: [f64; 2]| x[0], &geo, 0, 4).unwrap();
        assert_relative_eq!(p.eval(&geo, [0.2, 0.2]), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn constants_and_polynomials_are_reproduced() {
        let geo = ElementGeometry::new([[0.1, 0.0], [1.2, 0.3], [0.4, 0.8]]).unwrap();
        let c = project_element(&|_| 2.5, &geo, 3, 10).unwrap();
        let poly = |x: [f64; 2]| 1.0 + x[0] * x[1] - 2.0 * x[1].powi(3);
        let p = project_element(&poly, &geo, 3, 10).unwrap();
        for pt in [[0.3, 0.2], [0.6, 0.4], [0.5, 0.6]] {
            assert_relative_eq!(c.eval(&geo, pt), 2.5, epsilon = 1e-12);
            assert_relative_eq!(p.eval(&geo, pt), poly(pt), epsilon = 1e-12);
        }
        assert!(element_oscillation(&poly, &geo, 3, 10).unwrap() < 1e-12);
    }

    #[test]
    fn edge_projection_of_sine() {
        let e = project_edge(&|x: [f64; 2]| (PI * x[1]).sin(), [1.0, 0.0], [1.0, 1.0], 0, 20).unwrap();
        assert_relative_eq!(e.eval(0.3), 2.0 / PI, epsilon = 1e-12);
        let c = project_edge(&|_| -4.0, [0.0, 0.0], [0.5, 0.5], 2, 4).unwrap();
        assert_relative_eq!(c.eval(0.7), -4.0, epsilon = 1e-13);
    }

    #[test]
    fn non_finite_reports_point() {
        let geo = reference();
        let err = project_element(&|x: [f64; 2]| 1.0 / (x[0] - x[0]), &geo, 1, 4).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }
}
