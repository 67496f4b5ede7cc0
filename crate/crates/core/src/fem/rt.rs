//! Raviart–Thomas space `RT^p(K) = [P^p(K)]² + x P^p(K)` on one element.
//!
//! Members are stored as `[P^{p+1}(K)]²` coefficient vectors in the orthonormal
//! element basis. The spanning set is `(φ_i, 0)`, `(0, φ_i)` for `φ_i ∈ P^p` and
//! `(x − x_c) φ_k` for the homogeneous-degree-`p` members `φ_k`.

use nalgebra::DMatrix;

use super::basis::dim_p;
use super::element::ElementGeometry;
use super::eval::ElementQuad;

#[derive(Debug, Clone)]
pub struct RtSpace {
    pub p: usize,
    /// Number of RT basis functions, `(p + 1)(p + 3)`.
    pub n: usize,
    /// Column `j` holds the x-component of basis function `j` in `P^{p+1}`.
    pub bx: DMatrix<f64>,
    pub by: DMatrix<f64>,
}

pub const fn rt_dim(p: usize) -> usize {
    (p + 1) * (p + 3)
}

impl RtSpace {
    pub fn new(geo: &ElementGeometry, p: usize) -> Self {
        let np = dim_p(p);
        let nq = dim_p(p + 1);
        let n = rt_dim(p);
        let mut bx = DMatrix::zeros(nq, n);
        let mut by = DMatrix::zeros(nq, n);
        for i in 0..np {
            bx[(i, i)] = 1.0;
            by[(i, np + i)] = 1.0;
        }
        let first_top = if p == 0 { 0 } else { dim_p(p - 1) };
        let c = geo.centroid();
        let eq = ElementQuad::new(geo, p + 1, 2 * p + 2);
        for (m, k) in (first_top..np).enumerate() {
            let col = 2 * np + m;
            for q in 0..eq.len() {
                let b = eq.at(q);
                let x = eq.points[q];
                let w = eq.weights[q] * b[k].value;
                for j in 0..nq {
                    bx[(j, col)] += w * (x[0] - c[0]) * b[j].value;
                    by[(j, col)] += w * (x[1] - c[1]) * b[j].value;
                }
            }
        }
        Self { p, n, bx, by }
    }

    /// `[P^{p+1}]²` coefficients of `Σ a_j ψ_j`.
    pub fn expand(&self, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a = nalgebra::DVector::from_column_slice(a);
        (
            (&self.bx * &a).iter().copied().collect(),
            (&self.by * &a).iter().copied().collect(),
        )
    }
}
