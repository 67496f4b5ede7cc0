//! Gauss rules on the unit interval and on the reference triangle
//! `{(x, y) : x, y >= 0, x + y <= 1}`.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss–Legendre
//! rules, so they exist for any degree and always have positive weights.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Quadrature rule on a reference domain.
#[derive(Debug, Clone)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

pub type LineRule = QuadratureRule<f64>;
pub type TriangleRule = QuadratureRule<[f64; 2]>;

impl<P> QuadratureRule<P> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&P, f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..n {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss rule needs at least one point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn line_rule(degree: usize) -> Arc<LineRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LineRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(degree)
        .or_insert_with(|| {
            let (x, w) = gauss_legendre(degree / 2 + 1);
            Arc::new(LineRule {
                points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
                weights: w.iter().map(|w| 0.5 * w).collect(),
                degree,
            })
        })
        .clone()
}

/// Collapsed Gauss rule on the reference triangle exact for degree `degree`.
pub fn triangle_rule(degree: usize) -> Arc<TriangleRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<TriangleRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(degree)
        .or_insert_with(|| {
            // The Duffy Jacobian (1 - v) adds one degree in v.
            let n = (degree + 2).div_ceil(2);
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (xv, wv) in x.iter().zip(&w) {
                let v = 0.5 * (xv + 1.0);
                for (xu, wu) in x.iter().zip(&w) {
                    let u = 0.5 * (xu + 1.0);
                    points.push([u * (1.0 - v), v]);
                    weights.push(0.25 * wu * wv * (1.0 - v));
                }
            }
            Arc::new(TriangleRule {
                points,
                weights,
                degree,
            })
        })
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn triangle_rule_integrates_monomials_exactly() {
        for degree in 0..=16 {
            let rule = triangle_rule(degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 0.5).abs() < 1e-15);
            for a in 0..=degree {
                for b in 0..=degree - a {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .iter()
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!(
                        (approx - exact).abs() <= 1e-13 * exact,
                        "x^{a} y^{b}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn line_rule_integrates_monomials_exactly() {
        for degree in 0..=20 {
            let rule = line_rule(degree);
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            for k in 0..=degree {
                let approx: f64 = rule.iter().map(|(t, w)| w * t.powi(k as i32)).sum();
                assert!((approx - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "t^{k}");
            }
        }
    }
}
