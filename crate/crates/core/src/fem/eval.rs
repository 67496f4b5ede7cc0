//! Physical-element basis evaluation and quadrature tabulations.
//!
//! Physical basis functions are `φ_i(x) = φ̂_i(ξ(x)) / sqrt(|det J|)`, which keeps
//! them L²(K)-orthonormal on every affine triangle.

use super::basis::{dim_p, orthonormal_segment, orthonormal_triangle, tabulate, BasisEval};
use super::element::ElementGeometry;
use super::quadrature::line_rule;

/// Physical basis values and gradients of `P^degree(K)` at a physical point.
pub fn eval_basis(geo: &ElementGeometry, degree: usize, x: [f64; 2], out: &mut [BasisEval]) {
    let r = geo.map.to_reference(x);
    orthonormal_triangle(degree, r[0], r[1], out);
    let s = 1.0 / geo.map.det.sqrt();
    for b in out[..dim_p(degree)].iter_mut() {
        b.value *= s;
        let g = geo.map.grad_to_physical(b.grad);
        b.grad = [g[0] * s, g[1] * s];
    }
}

/// Value of the expansion `Σ c_i φ_i` at `x`.
pub fn eval_scalar(geo: &ElementGeometry, degree: usize, coeffs: &[f64], x: [f64; 2]) -> f64 {
    let mut buf = vec![BasisEval::default(); dim_p(degree)];
    eval_basis(geo, degree, x, &mut buf);
    buf.iter().zip(coeffs).map(|(b, c)| b.value * c).sum()
}

/// Value and gradient of `Σ c_i φ_i` at `x`.
pub fn eval_scalar_grad(
    geo: &ElementGeometry,
    degree: usize,
    coeffs: &[f64],
    x: [f64; 2],
) -> (f64, [f64; 2]) {
    let mut buf = vec![BasisEval::default(); dim_p(degree)];
    eval_basis(geo, degree, x, &mut buf);
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for (b, c) in buf.iter().zip(coeffs) {
        v += b.value * c;
        g[0] += b.grad[0] * c;
        g[1] += b.grad[1] * c;
    }
    (v, g)
}

/// Quadrature on one physical element with the basis tabulated at its points.
#[derive(Debug, Clone)]
pub struct ElementQuad {
    pub degree: usize,
    pub n: usize,
    pub points: Vec<[f64; 2]>,
    /// Physical weights (they sum to |K|).
    pub weights: Vec<f64>,
    pub basis: Vec<BasisEval>,
}

impl ElementQuad {
    pub fn new(geo: &ElementGeometry, degree: usize, quad_degree: usize) -> Self {
        let tab = tabulate(degree, quad_degree);
        let rule = super::quadrature::triangle_rule(quad_degree);
        let n = dim_p(degree);
        let s = 1.0 / geo.map.det.sqrt();
        let points = rule.points.iter().map(|r| geo.map.to_physical(*r)).collect();
        let weights = rule.weights.iter().map(|w| w * geo.map.det).collect();
        let basis = tab
            .evals
            .iter()
            .map(|b| {
                let g = geo.map.grad_to_physical(b.grad);
                BasisEval {
                    value: b.value * s,
                    grad: [g[0] * s, g[1] * s],
                }
            })
            .collect();
        Self {
            degree,
            n,
            points,
            weights,
            basis,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn at(&self, q: usize) -> &[BasisEval] {
        &self.basis[q * self.n..(q + 1) * self.n]
    }

    pub fn value(&self, q: usize, coeffs: &[f64]) -> f64 {
        self.at(q).iter().zip(coeffs).map(|(b, c)| b.value * c).sum()
    }

    pub fn grad(&self, q: usize, coeffs: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (b, c) in self.at(q).iter().zip(coeffs) {
            g[0] += b.grad[0] * c;
            g[1] += b.grad[1] * c;
        }
        g
    }
}

/// Quadrature on a straight segment `a → b` lying on the boundary of an element.
///
/// The segment parameter `t ∈ [0, 1]` runs from `a` to `b`; facet basis
/// functions `μ_k(t) = ℓ_k(t) / sqrt(|e|)` are orthonormal in `L²(e)`.
#[derive(Debug, Clone)]
pub struct FacetQuad {
    pub length: f64,
    pub t: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub elem_n: usize,
    pub elem: Vec<BasisEval>,
    pub facet_n: usize,
    pub facet: Vec<f64>,
}

impl FacetQuad {
    pub fn new(
        geo: &ElementGeometry,
        a: [f64; 2],
        b: [f64; 2],
        elem_degree: usize,
        facet_degree: usize,
        quad_degree: usize,
    ) -> Self {
        let rule = line_rule(quad_degree);
        let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let elem_n = dim_p(elem_degree);
        let facet_n = facet_degree + 1;
        let mut points = Vec::with_capacity(rule.len());
        let mut elem = vec![BasisEval::default(); elem_n * rule.len()];
        let mut facet = vec![0.0; facet_n * rule.len()];
        let fs = 1.0 / length.sqrt();
        for (q, &t) in rule.points.iter().enumerate() {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            points.push(x);
            eval_basis(geo, elem_degree, x, &mut elem[q * elem_n..(q + 1) * elem_n]);
            let fb = &mut facet[q * facet_n..(q + 1) * facet_n];
            orthonormal_segment(facet_degree, t, fb);
            fb.iter_mut().for_each(|v| *v *= fs);
        }
        Self {
            length,
            t: rule.points.clone(),
            points,
            weights: rule.weights.iter().map(|w| w * length).collect(),
            elem_n,
            elem,
            facet_n,
            facet,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn elem_at(&self, q: usize) -> &[BasisEval] {
        &self.elem[q * self.elem_n..(q + 1) * self.elem_n]
    }

    pub fn facet_at(&self, q: usize) -> &[f64] {
        &self.facet[q * self.facet_n..(q + 1) * self.facet_n]
    }

    pub fn elem_value(&self, q: usize, coeffs: &[f64]) -> f64 {
        self.elem_at(q).iter().zip(coeffs).map(|(b, c)| b.value * c).sum()
    }

    pub fn facet_value(&self, q: usize, coeffs: &[f64]) -> f64 {
        self.facet_at(q).iter().zip(coeffs).map(|(b, c)| b * c).sum()
    }
}

/// Value of a facet expansion at parameter `t` on a facet of length `length`.
pub fn eval_facet(degree: usize, length: f64, coeffs: &[f64], t: f64) -> f64 {
    let mut buf = vec![0.0; degree + 1];
    orthonormal_segment(degree, t, &mut buf);
    buf.iter().zip(coeffs).map(|(b, c)| b * c).sum::<f64>() / length.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn physical_basis_is_orthonormal() {
        let geo = ElementGeometry::new([[0.3, 0.1], [1.4, 0.5], [0.2, 1.3]]).unwrap();
        let eq = ElementQuad::new(&geo, 3, 6);
        let n = eq.n;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..eq.len())
                    .map(|q| eq.weights[q] * eq.at(q)[i].value * eq.at(q)[j].value)
                    .sum();
                assert_relative_eq!(s, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
        let total: f64 = eq.weights.iter().sum();
        assert_relative_eq!(total, geo.area, epsilon = 1e-14);
    }

    #[test]
    fn facet_basis_orthonormal_on_physical_edge() {
        let geo = ElementGeometry::new([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let fq = FacetQuad::new(&geo, [2.0, 0.0], [0.0, 1.0], 2, 3, 6);
        for i in 0..4 {
            for j in 0..4 {
                let s: f64 = (0..fq.len())
                    .map(|q| fq.weights[q] * fq.facet_at(q)[i] * fq.facet_at(q)[j])
                    .sum();
                assert_relative_eq!(s, if i == j { 1.0 } else { 0.0 }, epsilon = 1e-13);
            }
        }
    }
}
