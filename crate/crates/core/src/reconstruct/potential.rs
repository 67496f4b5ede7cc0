//! Superconvergent post-processed potential `u_h^*` and its continuous,
//! Dirichlet-exact averaged version `ũ_h`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::flux::EquilibratedFlux;
use crate::data::DataFn;
use crate::error::{Error, Result};
use crate::fem::basis::dim_p;
use crate::fem::element::LOCAL_FACETS;
use crate::fem::eval::{ElementQuad, FacetQuad};
use crate::fem::lagrange::lagrange_ref;
use crate::fem::projection::ScalarPoly;
use crate::hdg::HdgSolution;
use crate::mesh::{BoundaryTag, Mesh};

/// `(ν∇u*, ∇w)_K = −(q̃, ∇w)_K` for all `w ∈ P^{p+1}(K)`, with `(u*, 1)_K = (u_h, 1)_K`.
pub fn postprocess_potential(
    mesh: &Mesh,
    sol: &HdgSolution,
    flux: &EquilibratedFlux,
) -> Result<Vec<ScalarPoly>> {
    let d = sol.p + 1;
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let geo = mesh.geometry(k);
            let nu = mesh.element_nu(k);
            let n = dim_p(d);
            let eq = ElementQuad::new(geo, d, 2 * d);
            let fl = &flux.fields[k];
            let mut a = DMatrix::zeros(n - 1, n - 1);
            let mut r = DVector::zeros(n - 1);
            for q in 0..eq.len() {
                let w = eq.weights[q];
                let b = eq.at(q);
                let qv = [eq.value(q, &fl.x), eq.value(q, &fl.y)];
                for i in 1..n {
                    let gi = b[i].grad;
                    r[i - 1] -= w * (qv[0] * gi[0] + qv[1] * gi[1]);
                    for j in 1..n {
                        let gj = b[j].grad;
                        a[(i - 1, j - 1)] += w * nu * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
                }
            }
            let c = a.cholesky().ok_or_else(|| Error::SingularLocal {
                element: k,
                detail: "post-processing stiffness matrix is not positive definite".into(),
            })?;
            let x = c.solve(&r);
            let mut coeffs = vec![sol.elements[k].u[0]];
            coeffs.extend(x.iter());
            Ok(ScalarPoly { degree: d, coeffs })
        })
        .collect()
}

/// Global numbering of the degree-`k` Lagrange nodes of a conforming mesh.
#[derive(Debug, Clone)]
pub struct NodeMap {
    pub degree: usize,
    pub coords: Vec<[f64; 2]>,
    /// `element_nodes[k][i]` is the global id of local node `i` of element `k`.
    pub element_nodes: Vec<Vec<usize>>,
    /// Global ids of nodes lying on each facet, ordered along the facet.
    pub facet_nodes: Vec<Vec<usize>>,
}

impl NodeMap {
    pub fn new(mesh: &Mesh, degree: usize) -> Self {
        let lag = lagrange_ref(degree);
        let nv = mesh.vertices.len();
        let ke = degree.saturating_sub(1);
        let nfacet = mesh.num_facets();
        let mut next = nv + nfacet * ke;
        let interior = lag.len() - 3 - 3 * ke;
        let mut coords = vec![[0.0; 2]; next + mesh.num_elements() * interior];
        coords[..nv].copy_from_slice(&mesh.vertices);
        let mut element_nodes = Vec::with_capacity(mesh.num_elements());
        let mut facet_nodes = vec![Vec::new(); nfacet];
        for (k, el) in mesh.elements.iter().enumerate() {
            let geo = mesh.geometry(k);
            let mut ids = vec![0; lag.len()];
            ids[..3].copy_from_slice(el);
            for (lf, [a, _]) in LOCAL_FACETS.iter().enumerate() {
                let f = mesh.element_facets[k][lf];
                let same = mesh.facets[f].vertices[0] == el[*a];
                for j in 0..ke {
                    let g = if same { j } else { ke - 1 - j };
                    ids[3 + lf * ke + j] = nv + f * ke + g;
                }
            }
            for j in 0..interior {
                ids[3 + 3 * ke + j] = next;
                next += 1;
            }
            for (i, id) in ids.iter().enumerate() {
                coords[*id] = geo.map.to_physical(lag.nodes[i]);
            }
            element_nodes.push(ids);
        }
        for (f, facet) in mesh.facets.iter().enumerate() {
            let v = facet.vertices;
            let mut ids = vec![v[0]];
            ids.extend((0..ke).map(|j| nv + f * ke + j));
            ids.push(v[1]);
            facet_nodes[f] = ids;
        }
        Self {
            degree,
            coords,
            element_nodes,
            facet_nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

pub(crate) type ValueGradFn = Arc<dyn Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync>;

/// Non-polynomial summand added on some elements to reach exact Dirichlet traces.
#[derive(Clone)]
pub struct Extension {
    pub(crate) f: ValueGradFn,
}

impl std::fmt::Debug for Extension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Extension")
    }
}

impl Extension {
    pub fn new(f: impl Fn([f64; 2]) -> (f64, [f64; 2]) + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f) }
    }

    pub fn eval(&self, x: [f64; 2]) -> (f64, [f64; 2]) {
        (self.f)(x)
    }
}

/// Continuous piecewise `P^{p+1}` potential, optionally plus per-element extensions.
#[derive(Debug, Clone)]
pub struct ContinuousPotential {
    pub degree: usize,
    pub nodes: NodeMap,
    pub nodal: Vec<f64>,
    /// Polynomial part on each element in the orthonormal basis.
    pub coeffs: Vec<Vec<f64>>,
    pub extensions: Vec<Extension>,
    pub element_extension: Vec<Option<usize>>,
    /// Dirichlet facets whose data is not a polynomial of degree `≤ p + 1`.
    pub pending_facets: Vec<usize>,
}

fn physical_from_nodal(mesh: &Mesh, k: usize, degree: usize, nodal: &[f64]) -> Vec<f64> {
    let lag = lagrange_ref(degree);
    let s = mesh.geometry(k).map.det.sqrt();
    lag.modal_from_nodal(nodal).into_iter().map(|c| c * s).collect()
}

fn nodal_from_physical(mesh: &Mesh, k: usize, degree: usize, coeffs: &[f64]) -> Vec<f64> {
    let lag = lagrange_ref(degree);
    let s = 1.0 / mesh.geometry(k).map.det.sqrt();
    let modal: Vec<f64> = coeffs.iter().map(|c| c * s).collect();
    lag.nodal_from_modal(&modal)
}

/// Nodal averaging of `u*` followed by nodal Dirichlet enforcement.
pub fn make_continuous(
    mesh: &Mesh,
    ustar: &[ScalarPoly],
    g_d: &DataFn,
) -> ContinuousPotential {
    let degree = ustar.first().map_or(1, |u| u.degree);
    let nodes = NodeMap::new(mesh, degree);
    let mut sum = vec![0.0; nodes.len()];
    let mut count = vec![0usize; nodes.len()];
    for (k, u) in ustar.iter().enumerate() {
        let vals = nodal_from_physical(mesh, k, degree, &u.coeffs);
        for (id, v) in nodes.element_nodes[k].iter().zip(vals) {
            sum[*id] += v;
            count[*id] += 1;
        }
    }
    let mut nodal: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
    let mut pending = Vec::new();
    for (f, facet) in mesh.facets.iter().enumerate() {
        if facet.tag != Some(BoundaryTag::Dirichlet) {
            continue;
        }
        let (a, b) = mesh.facet_points(f);
        if g_d.degree_on_segment(a, b).map_or(true, |d| d > degree) {
            pending.push(f);
        }
        for id in &nodes.facet_nodes[f] {
            nodal[*id] = g_d.eval(nodes.coords[*id]);
        }
    }
    let coeffs = (0..mesh.num_elements())
        .map(|k| {
            let vals: Vec<f64> = nodes.element_nodes[k].iter().map(|id| nodal[*id]).collect();
            physical_from_nodal(mesh, k, degree, &vals)
        })
        .collect();
    ContinuousPotential {
        degree,
        nodal,
        coeffs,
        extensions: Vec::new(),
        element_extension: vec![None; mesh.num_elements()],
        pending_facets: pending,
        nodes,
    }
}

/// Interpolates a function with the element-local Lagrange nodes.
pub(crate) fn interpolate(mesh: &Mesh, k: usize, degree: usize, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let lag = lagrange_ref(degree);
    let geo = mesh.geometry(k);
    let vals: Vec<f64> = lag.nodes.iter().map(|r| f(geo.map.to_physical(*r))).collect();
    physical_from_nodal(mesh, k, degree, &vals)
}

/// Trace and continuity residuals of a potential reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PotentialAudit {
    /// `max |ũ − g_D|` over Dirichlet-facet quadrature points and nodes.
    pub dirichlet: f64,
    /// Largest disagreement between elements sharing a node.
    pub continuity: f64,
}

impl ContinuousPotential {
    /// Value and gradient on element `k` at a physical point.
    pub fn eval(&self, mesh: &Mesh, k: usize, x: [f64; 2]) -> (f64, [f64; 2]) {
        let (mut v, mut g) =
            crate::fem::eval::eval_scalar_grad(mesh.geometry(k), self.degree, &self.coeffs[k], x);
        if let Some(e) = self.element_extension[k] {
            let (ev, eg) = self.extensions[e].eval(x);
            v += ev;
            g[0] += eg[0];
            g[1] += eg[1];
        }
        (v, g)
    }

    /// Values and gradients at the points of an element quadrature whose basis
    /// has degree at least `self.degree`.
    pub fn at_quad(&self, k: usize, eq: &ElementQuad) -> Vec<(f64, [f64; 2])> {
        let c = &self.coeffs[k];
        let ext = self.element_extension[k].map(|e| &self.extensions[e]);
        (0..eq.len())
            .map(|q| {
                let mut v = eq.value(q, c);
                let mut g = eq.grad(q, c);
                if let Some(e) = ext {
                    let (ev, eg) = e.eval(eq.points[q]);
                    v += ev;
                    g[0] += eg[0];
                    g[1] += eg[1];
                }
                (v, g)
            })
            .collect()
    }

    pub fn audit(&self, mesh: &Mesh, g_d: &DataFn, quad_degree: usize) -> PotentialAudit {
        let mut out = PotentialAudit::default();
        for (f, facet) in mesh.facets.iter().enumerate() {
            if facet.tag != Some(BoundaryTag::Dirichlet) {
                continue;
            }
            let k = facet.elements[0];
            let (a, b) = mesh.facet_points(f);
            let fq = FacetQuad::new(mesh.geometry(k), a, b, 0, 0, quad_degree);
            let pts = fq.points.iter().copied().chain(self.nodes.facet_nodes[f].iter().map(|i| self.nodes.coords[*i]));
            for x in pts {
                let d = (self.eval(mesh, k, x).0 - g_d.eval(x)).abs();
                out.dirichlet = out.dirichlet.max(d);
            }
        }
        let mut first: Vec<Option<f64>> = vec![None; self.nodes.len()];
        for k in 0..mesh.num_elements() {
            for id in &self.nodes.element_nodes[k] {
                let v = self.eval(mesh, k, self.nodes.coords[*id]).0;
                match first[*id] {
                    None => first[*id] = Some(v),
                    Some(w) => out.continuity = out.continuity.max((v - w).abs()),
                }
            }
        }
        out
    }

    /// Recomputes nodal values from the polynomial part after an interior update.
    pub(crate) fn set_element(&mut self, mesh: &Mesh, k: usize, coeffs: Vec<f64>) {
        let vals = nodal_from_physical(mesh, k, self.degree, &coeffs);
        for (id, v) in self.nodes.element_nodes[k].iter().zip(vals) {
            if self.element_extension[k].is_none() {
                self.nodal[*id] = v;
            }
        }
        self.coeffs[k] = coeffs;
    }
}
