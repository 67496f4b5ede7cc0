//! Equispaced Lagrange nodes on the reference triangle and the modal ↔ nodal maps.
//!
//! Node order: the three vertices, then the interior nodes of each local facet
//! (facet `i` runs from `LOCAL_FACETS[i][0]` to `LOCAL_FACETS[i][1]`), then the
//! element-interior nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use super::basis::{dim_p, orthonormal_triangle, BasisEval};
use super::element::{LOCAL_FACETS, REF_VERTICES};

#[derive(Debug)]
pub struct LagrangeRef {
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    /// `vandermonde[(i, j)] = φ̂_j(node_i)`.
    pub vandermonde: DMatrix<f64>,
    /// Maps nodal values to reference modal coefficients.
    pub inverse: DMatrix<f64>,
}

impl LagrangeRef {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Indices of the nodes on local facet `f`, ordered along the facet from its first vertex.
    pub fn facet_nodes(&self, f: usize) -> Vec<usize> {
        let k = self.degree;
        let [a, b] = LOCAL_FACETS[f];
        let mut out = vec![a];
        out.extend((0..k.saturating_sub(1)).map(|j| 3 + f * (k - 1) + j));
        out.push(b);
        out
    }

    /// Reference modal coefficients for given nodal values.
    pub fn modal_from_nodal(&self, nodal: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(nodal);
        (&self.inverse * v).iter().copied().collect()
    }

    /// Nodal values of a reference modal expansion.
    pub fn nodal_from_modal(&self, modal: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(modal);
        (&self.vandermonde * v).iter().copied().collect()
    }
}

fn build(k: usize) -> LagrangeRef {
    let mut nodes: Vec<[f64; 2]> = REF_VERTICES.to_vec();
    let kf = k as f64;
    for [a, b] in LOCAL_FACETS {
        let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
        for j in 1..k {
            let t = j as f64 / kf;
            nodes.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
        }
    }
    for j in 1..k {
        for i in 1..k - j {
            nodes.push([i as f64 / kf, j as f64 / kf]);
        }
    }
    let n = dim_p(k);
    assert_eq!(nodes.len(), n);
    let mut vdm = DMatrix::zeros(n, n);
    let mut buf = vec![BasisEval::default(); n];
    for (i, p) in nodes.iter().enumerate() {
        orthonormal_triangle(k, p[0], p[1], &mut buf);
        for j in 0..n {
            vdm[(i, j)] = buf[j].value;
        }
    }
    let inverse = vdm
        .clone()
        .try_inverse()
        .expect("equispaced Lagrange Vandermonde is invertible");
    LagrangeRef {
        degree: k,
        nodes,
        vandermonde: vdm,
        inverse,
    }
}

pub fn lagrange_ref(degree: usize) -> Arc<LagrangeRef> {
    assert!(degree >= 1, "Lagrange elements need degree >= 1");
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LagrangeRef>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    cache
        .lock()
        .expect("lagrange cache poisoned")
        .entry(degree)
        .or_insert_with(|| Arc::new(build(degree)))
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodal_modal_roundtrip() {
        for k in 1..=5 {
            let l = lagrange_ref(k);
            let nodal: Vec<f64> = (0..l.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            let back = l.nodal_from_modal(&l.modal_from_nodal(&nodal));
            for (a, b) in nodal.iter().zip(&back) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn facet_nodes_lie_on_their_facet() {
        let l = lagrange_ref(4);
        for f in 0..3 {
            let idx = l.facet_nodes(f);
            assert_eq!(idx.len(), 5);
            for &i in &idx {
                let p = l.nodes[i];
                let on = match f {
                    0 => (p[0] + p[1] - 1.0).abs() < 1e-14,
                    1 => p[0].abs() < 1e-14,
                    _ => p[1].abs() < 1e-14,
                };
                assert!(on, "node {i} not on facet {f}");
            }
        }
    }
}
