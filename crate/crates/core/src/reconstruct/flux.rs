//! Element-by-element RT^p flux reconstruction from the HDG numerical flux.
//!
//! On each element the reconstruction matches the moments of `q̂_h·n` against
//! `P^p(e)` on every facet and the moments of `q_h` against `[P^{p-1}(K)]²`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::ProblemData;
use crate::error::{Error, Result};
use crate::fem::basis::dim_p;
use crate::fem::eval::{ElementQuad, FacetQuad};
use crate::fem::projection::{project_edge, project_element, VectorPoly};
use crate::fem::rt::RtSpace;
use crate::hdg::HdgSolution;
use crate::mesh::{BoundaryTag, Mesh};

/// Piecewise `[P^{p+1}(K)]²` flux with single-valued normal trace.
#[derive(Debug, Clone)]
pub struct EquilibratedFlux {
    pub p: usize,
    pub fields: Vec<VectorPoly>,
}

pub fn reconstruct_flux(mesh: &Mesh, sol: &HdgSolution) -> Result<EquilibratedFlux> {
    let p = sol.p;
    let fields = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| element_flux(mesh, sol, k))
        .collect::<Result<_>>()?;
    Ok(EquilibratedFlux { p, fields })
}

fn element_flux(mesh: &Mesh, sol: &HdgSolution, k: usize) -> Result<VectorPoly> {
    let p = sol.p;
    let geo = mesh.geometry(k);
    let rt = RtSpace::new(geo, p);
    let nf = p + 1;
    let mut a = DMatrix::zeros(rt.n, rt.n);
    let mut rhs = DVector::zeros(rt.n);
    let el = &sol.elements[k];
    for f in 0..3 {
        let (va, vb) = mesh.facet_points(mesh.element_facets[k][f]);
        let fq = FacetQuad::new(geo, va, vb, p + 1, p, 2 * p + 2);
        let [nx, ny] = geo.normal[f];
        for q in 0..fq.len() {
            let w = fq.weights[q];
            let eb = fq.elem_at(q);
            let mu = fq.facet_at(q);
            for j in 0..rt.n {
                let mut vn = 0.0;
                for (i, b) in eb.iter().enumerate() {
                    vn += b.value * (nx * rt.bx[(i, j)] + ny * rt.by[(i, j)]);
                }
                for m in 0..nf {
                    a[(f * nf + m, j)] += w * vn * mu[m];
                }
            }
        }
        for m in 0..nf {
            rhs[f * nf + m] = el.flux_moments[f][m];
        }
    }
    let ni = if p == 0 { 0 } else { dim_p(p - 1) };
    for i in 0..ni {
        let rx = 3 * nf + i;
        let ry = 3 * nf + ni + i;
        for j in 0..rt.n {
            a[(rx, j)] = rt.bx[(i, j)];
            a[(ry, j)] = rt.by[(i, j)];
        }
        rhs[rx] = el.qx[i];
        rhs[ry] = el.qy[i];
    }
    let c = a.lu().solve(&rhs).ok_or_else(|| Error::SingularLocal {
        element: k,
        detail: "Raviart–Thomas moment system is singular".into(),
    })?;
    let (x, y) = rt.expand(c.as_slice());
    Ok(VectorPoly {
        degree: p + 1,
        x,
        y,
    })
}

/// Equilibration residuals of a reconstructed flux.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FluxAudit {
    /// `max_K ‖∇·q̃ − Π_K^p f‖_{L²(K)}`.
    pub divergence: f64,
    /// `max_e ‖[[q̃·n]]‖_{L²(e)}` over interior facets.
    pub normal_jump: f64,
    /// `max_e ‖q̃·n − Π_e^p g_N‖_{L²(e)}` over Neumann facets.
    pub neumann: f64,
    /// `‖Π^p f‖_{L²(Ω)}`, the scale for the divergence residual.
    pub source_norm: f64,
}

impl EquilibratedFlux {
    pub fn eval(&self, mesh: &Mesh, k: usize, x: [f64; 2]) -> [f64; 2] {
        self.fields[k].eval(mesh.geometry(k), x)
    }

    /// Checks the projected equilibration conditions for data `data`.
    pub fn audit(&self, mesh: &Mesh, data: &ProblemData, quad_degree: usize) -> Result<FluxAudit> {
        let p = self.p;
        let deg = self.fields.first().map_or(p + 1, |f| f.degree);
        let mut out = FluxAudit::default();
        let mut src2 = 0.0;
        for k in 0..mesh.num_elements() {
            let geo = mesh.geometry(k);
            let pf = project_element(&data.f.as_fn(), geo, p, quad_degree)?;
            let eq = ElementQuad::new(geo, deg, 2 * deg + 2);
            let fld = &self.fields[k];
            let mut r2 = 0.0;
            for q in 0..eq.len() {
                let div = eq.grad(q, &fld.x)[0] + eq.grad(q, &fld.y)[1];
                let pv = eq.value(q, &pf.coeffs);
                r2 += eq.weights[q] * (div - pv).powi(2);
                src2 += eq.weights[q] * pv * pv;
            }
            out.divergence = out.divergence.max(r2.sqrt());
        }
        out.source_norm = src2.sqrt();
        for (fi, facet) in mesh.facets.iter().enumerate() {
            let (a, b) = mesh.facet_points(fi);
            let normal = facet.normal;
            let trace = |k: usize, fq: &FacetQuad, q: usize| {
                let f = &self.fields[k];
                normal[0] * fq.elem_value(q, &f.x) + normal[1] * fq.elem_value(q, &f.y)
            };
            let k0 = facet.elements[0];
            let fq0 = FacetQuad::new(mesh.geometry(k0), a, b, deg, p, 2 * deg + 2);
            if !facet.boundary {
                let k1 = facet.elements[1];
                let fq1 = FacetQuad::new(mesh.geometry(k1), a, b, deg, p, 2 * deg + 2);
                let j2: f64 = (0..fq0.len())
                    .map(|q| fq0.weights[q] * (trace(k0, &fq0, q) - trace(k1, &fq1, q)).powi(2))
                    .sum();
                out.normal_jump = out.normal_jump.max(j2.sqrt());
            } else if facet.tag == Some(BoundaryTag::Neumann) {
                let g = project_edge(&data.g_n.as_fn(), a, b, p, quad_degree)?;
                let r2: f64 = (0..fq0.len())
                    .map(|q| fq0.weights[q] * (trace(k0, &fq0, q) - g.eval(fq0.t[q])).powi(2))
                    .sum();
                out.neumann = out.neumann.max(r2.sqrt());
            }
        }
        Ok(out)
    }
}
