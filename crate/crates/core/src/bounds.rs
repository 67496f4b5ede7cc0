//! Guaranteed bounds for a linear output from primal and adjoint reconstructions.

use rayon::prelude::*;

use crate::data::{DataFn, OutputFunctional, ProblemData};
use crate::error::{Error, Result};
use crate::fem::element::poincare_constants;
use crate::fem::eval::{ElementQuad, FacetQuad};
use crate::fem::projection::{project_edge, project_element, EdgePoly, ScalarPoly};
use crate::mesh::{BoundaryTag, Mesh};
use crate::reconstruct::Reconstruction;

/// How the oscillation terms of the local estimates are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaMode {
    /// Data minus its `L²` projection of degree `p`.
    #[default]
    Projected,
    /// Data minus the divergence and normal trace of the reconstructed fluxes.
    ZeroOrder,
}

/// Per-element terms of `η_K^{∓}`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EtaTerms {
    pub flux: f64,
    pub source: f64,
    pub neumann: f64,
}

impl EtaTerms {
    pub fn total(&self) -> f64 {
        self.flux + self.source + self.neumann
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EtaBreakdown {
    pub minus: Vec<EtaTerms>,
    pub plus: Vec<EtaTerms>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    pub s_minus: f64,
    pub s_plus: f64,
    /// Midpoint `(s⁺ + s⁻)/2`.
    pub s_tilde: f64,
    /// `(s⁺ − s⁻)/2`.
    pub half_gap: f64,
    pub kappa: f64,
    /// `κ` fell back to 1 because the primal residual vanished.
    pub kappa_degenerate: bool,
    /// Reconstruction-based estimate the bounds are centered on before the
    /// asymmetric corrections.
    pub s_center: f64,
    /// Per-element contributions `Δ_h^K` to `s⁺ − s⁻`.
    pub gaps: Vec<f64>,
    /// Energy norms `‖q̃ + ν∇ũ‖` and `‖ζ̃ + ν∇ξ̃‖`.
    pub primal_residual: f64,
    pub adjoint_residual: f64,
}

/// Per-element quantities gathered at quadrature points.
struct ElementSums {
    rq2: f64,
    rz2: f64,
    rqz: f64,
    center: f64,
    osc_src: [f64; 3],
    neumann: Vec<(f64, [f64; 3])>,
    c1: f64,
    nu: f64,
}

/// `(a², b², ab)` accumulated; `‖±a − κb‖² = a² ∓ 2κab + κ²b²`.
fn combine(s: &[f64; 3], sign: f64, kappa: f64) -> f64 {
    (s[0] - 2.0 * sign * kappa * s[2] + kappa * kappa * s[1]).max(0.0).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn element_sums(
    mesh: &Mesh,
    k: usize,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
    mode: EtaMode,
) -> Result<ElementSums> {
    let geo = mesh.geometry(k);
    let nu = mesh.element_nu(k);
    let deg = primal.potential.degree.max(primal.flux.fields[k].degree);
    let eq = ElementQuad::new(geo, deg, quad.max(2 * deg + 2));
    let u = primal.potential.at_quad(k, &eq);
    let xi = adjoint.potential.at_quad(k, &eq);
    let qf = &primal.flux.fields[k];
    let zf = &adjoint.flux.fields[k];
    // `None` marks data reproduced by the projection, whose oscillation is zero.
    let project = |d: &DataFn| -> Result<Option<ScalarPoly>> {
        if d.global_degree().is_some_and(|deg| deg <= p) {
            return Ok(None);
        }
        project_element(&d.as_fn(), geo, p, quad).map(Some)
    };
    let (pf, pfo) = match mode {
        EtaMode::Projected => (project(&data.f)?, project(&out.f_o)?),
        EtaMode::ZeroOrder => (None, None),
    };
    let mut s = ElementSums {
        rq2: 0.0,
        rz2: 0.0,
        rqz: 0.0,
        center: 0.0,
        osc_src: [0.0; 3],
        neumann: Vec::new(),
        c1: poincare_constants(geo, 0).0,
        nu,
    };
    for q in 0..eq.len() {
        let w = eq.weights[q];
        let x = eq.points[q];
        let (uv, ug) = u[q];
        let (xv, xg) = xi[q];
        let rq = [eq.value(q, &qf.x) + nu * ug[0], eq.value(q, &qf.y) + nu * ug[1]];
        let rz = [eq.value(q, &zf.x) + nu * xg[0], eq.value(q, &zf.y) + nu * xg[1]];
        s.rq2 += w / nu * (rq[0] * rq[0] + rq[1] * rq[1]);
        s.rz2 += w / nu * (rz[0] * rz[0] + rz[1] * rz[1]);
        s.rqz += w / nu * (rq[0] * rz[0] + rq[1] * rz[1]);
        let f = data.f.eval(x);
        let fo = out.f_o.eval(x);
        s.center += w * (fo * uv + f * xv - nu * (ug[0] * xg[0] + ug[1] * xg[1]));
        let (of, ofo) = match mode {
            EtaMode::Projected => (
                pf.as_ref().map_or(0.0, |pf| f - eq.value(q, &pf.coeffs)),
                pfo.as_ref().map_or(0.0, |pfo| fo - eq.value(q, &pfo.coeffs)),
            ),
            EtaMode::ZeroOrder => (
                f - (eq.grad(q, &qf.x)[0] + eq.grad(q, &qf.y)[1]),
                fo - (eq.grad(q, &zf.x)[0] + eq.grad(q, &zf.y)[1]),
            ),
        };
        // a = oscillation of f^O, b = oscillation of f.
        s.osc_src[0] += w * ofo * ofo;
        s.osc_src[1] += w * of * of;
        s.osc_src[2] += w * ofo * of;
    }
    for lf in 0..3 {
        let f = mesh.element_facets[k][lf];
        if mesh.facets[f].tag != Some(BoundaryTag::Neumann) {
            continue;
        }
        let (a, b) = mesh.facet_points(f);
        let fq = FacetQuad::new(geo, a, b, deg, 0, quad.max(2 * deg + 2));
        let n = geo.normal[lf];
        let project = |d: &DataFn| -> Result<Option<EdgePoly>> {
            if d.degree_on_segment(a, b).is_some_and(|deg| deg <= p) {
                return Ok(None);
            }
            project_edge(&d.as_fn(), a, b, p, quad).map(Some)
        };
        let (pg, pgo) = match mode {
            EtaMode::Projected => (project(&data.g_n)?, project(&out.g_n_o)?),
            EtaMode::ZeroOrder => (None, None),
        };
        let mut acc = [0.0; 3];
        for q in 0..fq.len() {
            let w = fq.weights[q];
            let x = fq.points[q];
            let g = data.g_n.eval(x);
            let go = out.g_n_o.eval(x);
            let uv = primal.potential.eval(mesh, k, x).0;
            let xv = adjoint.potential.eval(mesh, k, x).0;
            s.center += w * (go * uv - g * xv);
            // The adjoint flux satisfies ζ·n = −g_N^O, so its residual is g_N^O + ζ̃·n.
            let (og, ogo) = match mode {
                EtaMode::Projected => (
                    pg.as_ref().map_or(0.0, |pg| g - pg.eval(fq.t[q])),
                    pgo.as_ref().map_or(0.0, |pgo| go - pgo.eval(fq.t[q])),
                ),
                EtaMode::ZeroOrder => {
                    let qn = n[0] * fq.elem_value(q, &qf.x) + n[1] * fq.elem_value(q, &qf.y);
                    let zn = n[0] * fq.elem_value(q, &zf.x) + n[1] * fq.elem_value(q, &zf.y);
                    (g - qn, go + zn)
                }
            };
            acc[0] += w * ogo * ogo;
            acc[1] += w * og * og;
            acc[2] += w * ogo * og;
        }
        s.neumann.push((poincare_constants(geo, lf).1, acc));
    }
    Ok(s)
}

/// Local estimates `η_K^{∓}` for a given `κ`.
fn etas(sums: &[ElementSums], kappa: f64) -> EtaBreakdown {
    let mut minus = Vec::with_capacity(sums.len());
    let mut plus = Vec::with_capacity(sums.len());
    for s in sums {
        let r = [s.rz2, s.rq2, s.rqz];
        let sc = s.c1 / s.nu.sqrt();
        // Upper signs give η⁻, lower signs η⁺.
        for (sign, outv) in [(1.0, &mut minus), (-1.0, &mut plus)] {
            let neumann = s
                .neumann
                .iter()
                .map(|(c2, acc)| c2 / s.nu.sqrt() * combine(acc, -sign, kappa))
                .sum();
            outv.push(EtaTerms {
                flux: combine(&r, sign, kappa),
                source: sc * combine(&s.osc_src, sign, kappa),
                neumann,
            });
        }
    }
    EtaBreakdown { minus, plus }
}

fn gather(
    mesh: &Mesh,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
    mode: EtaMode,
) -> Result<Vec<ElementSums>> {
    (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| element_sums(mesh, k, p, primal, adjoint, data, out, quad, mode))
        .collect()
}

/// Global `κ = ‖ζ̃ + ν∇ξ̃‖ / ‖q̃ + ν∇ũ‖`; 1 with a flag when the denominator vanishes.
pub fn compute_kappa(primal_residual: f64, adjoint_residual: f64) -> (f64, bool) {
    if primal_residual > 0.0 && primal_residual.is_finite() {
        let k = adjoint_residual / primal_residual;
        if k > 0.0 && k.is_finite() {
            return (k, false);
        }
    }
    (1.0, true)
}

/// Bounds from projected-equilibrated reconstructions with the optimal global `κ`.
#[allow(clippy::too_many_arguments)]
pub fn compute_bounds(
    mesh: &Mesh,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
    mode: EtaMode,
) -> Result<BoundsResult> {
    let sums = gather(mesh, p, primal, adjoint, data, out, quad, mode)?;
    let primal_residual = sums.iter().map(|s| s.rq2).sum::<f64>().sqrt();
    let adjoint_residual = sums.iter().map(|s| s.rz2).sum::<f64>().sqrt();
    let (kappa, degenerate) = compute_kappa(primal_residual, adjoint_residual);
    Ok(assemble(&sums, kappa, degenerate, primal_residual, adjoint_residual))
}

/// Same as [`compute_bounds`] with a prescribed `κ > 0`.
#[allow(clippy::too_many_arguments)]
pub fn compute_bounds_with_kappa(
    mesh: &Mesh,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
    mode: EtaMode,
    kappa: f64,
) -> Result<BoundsResult> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
    }
    let sums = gather(mesh, p, primal, adjoint, data, out, quad, mode)?;
    let primal_residual = sums.iter().map(|s| s.rq2).sum::<f64>().sqrt();
    let adjoint_residual = sums.iter().map(|s| s.rz2).sum::<f64>().sqrt();
    Ok(assemble(&sums, kappa, false, primal_residual, adjoint_residual))
}

/// Local estimates for a prescribed `κ`.
#[allow(clippy::too_many_arguments)]
pub fn compute_eta(
    mesh: &Mesh,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
    mode: EtaMode,
    kappa: f64,
) -> Result<EtaBreakdown> {
    let sums = gather(mesh, p, primal, adjoint, data, out, quad, mode)?;
    Ok(etas(&sums, kappa))
}

fn assemble(
    sums: &[ElementSums],
    kappa: f64,
    kappa_degenerate: bool,
    primal_residual: f64,
    adjoint_residual: f64,
) -> BoundsResult {
    let eta = etas(sums, kappa);
    let s_center: f64 = sums.iter().map(|s| s.center).sum();
    let c = 1.0 / (4.0 * kappa);
    let sum_minus: f64 = eta.minus.iter().map(|e| e.total().powi(2)).sum();
    let sum_plus: f64 = eta.plus.iter().map(|e| e.total().powi(2)).sum();
    let s_minus = s_center - c * sum_minus;
    let s_plus = s_center + c * sum_plus;
    let gaps = eta
        .minus
        .iter()
        .zip(&eta.plus)
        .map(|(m, p)| c * (m.total().powi(2) + p.total().powi(2)))
        .collect();
    BoundsResult {
        s_minus,
        s_plus,
        s_tilde: 0.5 * (s_plus + s_minus),
        half_gap: 0.5 * (s_plus - s_minus),
        kappa,
        kappa_degenerate,
        s_center,
        gaps,
        primal_residual,
        adjoint_residual,
    }
}

/// Data degrees that make the projected equilibration exact.
fn require_polynomial(data: &ProblemData, out: &OutputFunctional, p: usize) -> Result<()> {
    for (name, f) in [("f", &data.f), ("g_N", &data.g_n), ("f^O", &out.f_o), ("g_N^O", &out.g_n_o)] {
        if !f.is_zero() && f.global_degree().map_or(true, |d| d > p) {
            return Err(Error::NotPolynomialData(format!(
                "{name} is not known to be a polynomial of degree ≤ {p}; \
                 the equilibrated-flux bounds would not be guaranteed"
            )));
        }
    }
    Ok(())
}

/// Bounds for exactly equilibrated reconstructions:
/// `s̃ = ℓ^O(ũ, q̃) + ½(ν⁻¹(q̃ + ν∇ũ), ζ̃ − ν∇ξ̃)`, half gap `½‖q̃ + ν∇ũ‖‖ζ̃ + ν∇ξ̃‖`.
pub fn representation_bounds(
    mesh: &Mesh,
    p: usize,
    primal: &Reconstruction,
    adjoint: &Reconstruction,
    data: &ProblemData,
    out: &OutputFunctional,
    quad: usize,
) -> Result<BoundsResult> {
    require_polynomial(data, out, p)?;
    let parts: Vec<(f64, f64, f64, f64)> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| {
            let geo = mesh.geometry(k);
            let nu = mesh.element_nu(k);
            let deg = primal.potential.degree.max(primal.flux.fields[k].degree);
            let eq = ElementQuad::new(geo, deg, quad.max(2 * deg + 2));
            let u = primal.potential.at_quad(k, &eq);
            let xi = adjoint.potential.at_quad(k, &eq);
            let qf = &primal.flux.fields[k];
            let zf = &adjoint.flux.fields[k];
            let (mut rq2, mut rz2, mut ell, mut cross) = (0.0, 0.0, 0.0, 0.0);
            for q in 0..eq.len() {
                let w = eq.weights[q];
                let (uv, ug) = u[q];
                let xg = xi[q].1;
                let qv = [eq.value(q, &qf.x), eq.value(q, &qf.y)];
                let zv = [eq.value(q, &zf.x), eq.value(q, &zf.y)];
                let rq = [qv[0] + nu * ug[0], qv[1] + nu * ug[1]];
                let rz = [zv[0] + nu * xg[0], zv[1] + nu * xg[1]];
                let zm = [zv[0] - nu * xg[0], zv[1] - nu * xg[1]];
                rq2 += w / nu * (rq[0] * rq[0] + rq[1] * rq[1]);
                rz2 += w / nu * (rz[0] * rz[0] + rz[1] * rz[1]);
                cross += w / nu * (rq[0] * zm[0] + rq[1] * zm[1]);
                ell += w * out.f_o.eval(eq.points[q]) * uv;
            }
            for lf in 0..3 {
                let f = mesh.element_facets[k][lf];
                let tag = mesh.facets[f].tag;
                if tag.is_none() {
                    continue;
                }
                let (a, b) = mesh.facet_points(f);
                let fq = FacetQuad::new(geo, a, b, deg, 0, quad.max(2 * deg + 2));
                let n = geo.normal[lf];
                for q in 0..fq.len() {
                    let x = fq.points[q];
                    let w = fq.weights[q];
                    ell += match tag {
                        Some(BoundaryTag::Dirichlet) => {
                            let qn = n[0] * fq.elem_value(q, &qf.x) + n[1] * fq.elem_value(q, &qf.y);
                            w * out.g_d_o.eval(x) * qn
                        }
                        _ => w * out.g_n_o.eval(x) * primal.potential.eval(mesh, k, x).0,
                    };
                }
            }
            Ok((rq2, rz2, ell, cross))
        })
        .collect::<Result<_>>()?;
    let rq = parts.iter().map(|p| p.0).sum::<f64>().sqrt();
    let rz = parts.iter().map(|p| p.1).sum::<f64>().sqrt();
    let ell: f64 = parts.iter().map(|p| p.2).sum();
    let cross: f64 = parts.iter().map(|p| p.3).sum();
    let s_tilde = ell + 0.5 * cross;
    let half_gap = 0.5 * rq * rz;
    let (kappa, kappa_degenerate) = compute_kappa(rq, rz);
    Ok(BoundsResult {
        s_minus: s_tilde - half_gap,
        s_plus: s_tilde + half_gap,
        s_tilde,
        half_gap,
        kappa,
        kappa_degenerate,
        s_center: ell,
        gaps: parts
            .iter()
            .map(|p| if kappa_degenerate { 0.0 } else { (p.1 + kappa * kappa * p.0) / (2.0 * kappa) })
            .collect(),
        primal_residual: rq,
        adjoint_residual: rz,
    })
}
