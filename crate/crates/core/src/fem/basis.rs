//! Hierarchical orthonormal (modal) bases.
//!
//! On the reference triangle `T = {x, y >= 0, x + y <= 1}` we use the
//! Dubiner–Koornwinder polynomials, normalized so that `∫_T φ_i φ_j = δ_ij`.
//! Basis functions are ordered by total degree, so the first `dim(q)`
//! functions span `P^q(T)` for every `q`.
//!
//! On a segment parameterized by `t ∈ [0, 1]` we use shifted Legendre
//! polynomials normalized so that `∫_0^1 ℓ_i ℓ_j dt = δ_ij`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::quadrature::triangle_rule;

/// Dimension of `P^q` on a triangle.
pub const fn dim_p(q: usize) -> usize {
    (q + 1) * (q + 2) / 2
}

/// Value and reference gradient of one basis function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BasisEval {
    pub value: f64,
    pub grad: [f64; 2],
}

/// Jacobi polynomials `P_n^{(alpha, 0)}(z)` and their derivatives for `n <= degree`.
fn jacobi_alpha0(degree: usize, alpha: f64, z: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; degree + 1];
    let mut dp = vec![0.0; degree + 1];
    p[0] = 1.0;
    if degree == 0 {
        return (p, dp);
    }
    p[1] = 0.5 * ((alpha + 2.0) * z + alpha);
    dp[1] = 0.5 * (alpha + 2.0);
    for n in 2..=degree {
        let nf = n as f64;
        let s = 2.0 * nf + alpha;
        let a1 = 2.0 * nf * (nf + alpha) * (s - 2.0);
        let a2 = (s - 1.0) * alpha * alpha;
        let a3 = (s - 1.0) * s * (s - 2.0);
        let a4 = 2.0 * (nf + alpha - 1.0) * (nf - 1.0) * s;
        p[n] = ((a2 + a3 * z) * p[n - 1] - a4 * p[n - 2]) / a1;
        dp[n] = ((a2 + a3 * z) * dp[n - 1] + a3 * p[n - 1] - a4 * dp[n - 2]) / a1;
    }
    (p, dp)
}

/// Unnormalized Dubiner functions on the reference triangle, hierarchical order.
fn dubiner_raw(degree: usize, x: f64, y: f64, out: &mut [BasisEval]) {
    // Collapsed-coordinate Legendre factor written without the singular map:
    // Q_i = S^i P_i(A / S) with A = 2x + y - 1, S = 1 - y.
    let a = 2.0 * x + y - 1.0;
    let s = 1.0 - y;
    let mut q = vec![[0.0; 3]; degree + 1]; // value, d/dx, d/dy
    q[0] = [1.0, 0.0, 0.0];
    if degree >= 1 {
        q[1] = [a, 2.0, 1.0];
    }
    for n in 1..degree {
        let nf = n as f64;
        let c1 = (2.0 * nf + 1.0) / (nf + 1.0);
        let c2 = nf / (nf + 1.0);
        let (qn, qm) = (q[n], q[n - 1]);
        q[n + 1] = [
            c1 * a * qn[0] - c2 * s * s * qm[0],
            c1 * (2.0 * qn[0] + a * qn[1]) - c2 * s * s * qm[1],
            c1 * (qn[0] + a * qn[2]) - c2 * (-2.0 * s * qm[0] + s * s * qm[2]),
        ];
    }
    let eta = 2.0 * y - 1.0;
    let mut idx = 0;
    for total in 0..=degree {
        for i in (0..=total).rev() {
            let j = total - i;
            let (pj, dpj) = jacobi_alpha0(j, 2.0 * i as f64 + 1.0, eta);
            let (v, dv) = (pj[j], 2.0 * dpj[j]);
            let qi = q[i];
            out[idx] = BasisEval {
                value: qi[0] * v,
                grad: [qi[1] * v, qi[2] * v + qi[0] * dv],
            };
            idx += 1;
        }
    }
}

fn dubiner_norms(degree: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("basis cache poisoned");
    guard
        .entry(degree)
        .or_insert_with(|| {
            let n = dim_p(degree);
            let rule = triangle_rule(2 * degree);
            let mut sums = vec![0.0; n];
            let mut buf = vec![BasisEval::default(); n];
            for (pt, w) in rule.iter() {
                dubiner_raw(degree, pt[0], pt[1], &mut buf);
                for (s, b) in sums.iter_mut().zip(&buf) {
                    *s += w * b.value * b.value;
                }
            }
            Arc::new(sums.into_iter().map(|s| 1.0 / s.sqrt()).collect())
        })
        .clone()
}

/// Evaluate the orthonormal reference basis of `P^degree(T)` at `(x, y)`.
pub fn orthonormal_triangle(degree: usize, x: f64, y: f64, out: &mut [BasisEval]) {
    let n = dim_p(degree);
    debug_assert!(out.len() >= n);
    dubiner_raw(degree, x, y, &mut out[..n]);
    let norms = dubiner_norms(degree);
    for (b, s) in out[..n].iter_mut().zip(norms.iter()) {
        b.value *= s;
        b.grad[0] *= s;
        b.grad[1] *= s;
    }
}

/// Orthonormal shifted Legendre values `ℓ_0..=ℓ_degree` at `t ∈ [0, 1]`.
pub fn orthonormal_segment(degree: usize, t: f64, out: &mut [f64]) {
    let z = 2.0 * t - 1.0;
    let mut p0 = 1.0;
    let mut p1 = z;
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = 3f64.sqrt() * z;
    }
    for k in 1..degree {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * z * p1 - kf * p0) / (kf + 1.0);
        out[k + 1] = (2.0 * kf + 3.0).sqrt() * p2;
        p0 = p1;
        p1 = p2;
    }
}

/// Basis values at the points of a reference triangle rule.
#[derive(Debug)]
pub struct Tabulation {
    pub degree: usize,
    pub quad_degree: usize,
    /// `evals[q * n + i]` is basis function `i` at quadrature point `q`.
    pub evals: Vec<BasisEval>,
    pub n: usize,
}

impl Tabulation {
    pub fn at(&self, q: usize) -> &[BasisEval] {
        &self.evals[q * self.n..(q + 1) * self.n]
    }
}

/// Cached tabulation of the degree-`degree` basis on the degree-`quad_degree` rule.
pub fn tabulate(degree: usize, quad_degree: usize) -> Arc<Tabulation> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Tabulation>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("basis cache poisoned").get(&(degree, quad_degree)) {
        return t.clone();
    }
    let rule = triangle_rule(quad_degree);
    let n = dim_p(degree);
    let mut evals = vec![BasisEval::default(); n * rule.len()];
    for (q, pt) in rule.points.iter().enumerate() {
        orthonormal_triangle(degree, pt[0], pt[1], &mut evals[q * n..(q + 1) * n]);
    }
    let tab = Arc::new(Tabulation {
        degree,
        quad_degree,
        evals,
        n,
    });
    cache
        .lock()
        .expect("basis cache poisoned")
        .insert((degree, quad_degree), tab.clone());
    tab
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::line_rule;

    #[test]
    fn triangle_basis_is_orthonormal() {
        for degree in 0..=7 {
            let n = dim_p(degree);
            let rule = triangle_rule(2 * degree);
            let mut gram = vec![0.0; n * n];
            let mut buf = vec![BasisEval::default(); n];
            for (pt, w) in rule.iter() {
                orthonormal_triangle(degree, pt[0], pt[1], &mut buf);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * buf[i].value * buf[j].value;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - expect).abs() < 1e-12, "deg {degree} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let degree = 6;
        let n = dim_p(degree);
        let (x, y, h) = (0.23, 0.41, 1e-6);
        let mut c = vec![BasisEval::default(); n];
        let mut px = vec![BasisEval::default(); n];
        let mut mx = vec![BasisEval::default(); n];
        let mut py = vec![BasisEval::default(); n];
        let mut my = vec![BasisEval::default(); n];
        orthonormal_triangle(degree, x, y, &mut c);
        orthonormal_triangle(degree, x + h, y, &mut px);
        orthonormal_triangle(degree, x - h, y, &mut mx);
        orthonormal_triangle(degree, x, y + h, &mut py);
        orthonormal_triangle(degree, x, y - h, &mut my);
        for i in 0..n {
            let fdx = (px[i].value - mx[i].value) / (2.0 * h);
            let fdy = (py[i].value - my[i].value) / (2.0 * h);
            assert!((fdx - c[i].grad[0]).abs() < 1e-6 * (1.0 + fdx.abs()), "dx {i}");
            assert!((fdy - c[i].grad[1]).abs() < 1e-6 * (1.0 + fdy.abs()), "dy {i}");
        }
    }

    #[test]
    fn hierarchical_prefix_spans_lower_degree() {
        // The first dim_p(q) functions of the degree-7 basis have degree <= q:
        // their values must agree with the degree-q basis.
        let mut hi = vec![BasisEval::default(); dim_p(7)];
        let mut lo = vec![BasisEval::default(); dim_p(3)];
        orthonormal_triangle(7, 0.3, 0.2, &mut hi);
        orthonormal_triangle(3, 0.3, 0.2, &mut lo);
        for i in 0..dim_p(3) {
            assert!((hi[i].value - lo[i].value).abs() < 1e-13);
        }
    }

    #[test]
    fn segment_basis_is_orthonormal() {
        let degree = 8;
        let rule = line_rule(2 * degree);
        let mut buf = vec![0.0; degree + 1];
        let mut gram = vec![0.0; (degree + 1) * (degree + 1)];
        for (t, w) in rule.iter() {
            orthonormal_segment(degree, *t, &mut buf);
            for i in 0..=degree {
                for j in 0..=degree {
                    gram[i * (degree + 1) + j] += w * buf[i] * buf[j];
                }
            }
        }
        for i in 0..=degree {
            for j in 0..=degree {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * (degree + 1) + j] - expect).abs() < 1e-13);
            }
        }
    }
}
