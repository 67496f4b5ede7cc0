//! HDG discretization of `q = −ν∇u, ∇·q = f` with static condensation onto the
//! facet trace `û_h`.
//!
//! On each element the unknowns are `(q_x, q_y, u) ∈ [P^p]³` and the numerical
//! flux is `q̂·n = q·n + τ(u − û)`. The transmission condition asks the moments
//! of `q̂·n` against `P^p(e)` to cancel across interior facets and to equal those
//! of `g_N` on Neumann facets; Dirichlet traces are `Π_e^p g_D`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{DataFn, OutputFunctional, ProblemData};
use crate::error::{Error, Result};
use crate::fem::basis::dim_p;
use crate::fem::eval::{ElementQuad, FacetQuad};
use crate::fem::projection::{check_finite, facet_moments};
use crate::linalg::TripletBuilder;
use crate::mesh::{BoundaryTag, Mesh};

/// Polynomial degree, stabilization and data-quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization {
    pub p: usize,
    pub tau: f64,
    /// Exactness degree for integrals of data functions; `2p + 4` when `None`.
    pub quad_degree: Option<usize>,
}

impl Discretization {
    pub fn new(p: usize, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be > 0, got {tau}")));
        }
        Ok(Self {
            p,
            tau,
            quad_degree: None,
        })
    }

    pub fn with_quad_degree(mut self, q: Option<usize>) -> Self {
        self.quad_degree = q;
        self
    }

    pub fn data_quad(&self) -> usize {
        self.quad_degree.unwrap_or(2 * self.p + 4).max(2 * self.p + 2)
    }
}

/// Element-local HDG unknowns.
#[derive(Debug, Clone)]
pub struct ElementSolution {
    pub u: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    /// Moments `⟨q̂·n_K, μ_m⟩_e` for each local facet, with `n_K` outward from
    /// this element and `μ_m` the facet basis in global facet orientation.
    pub flux_moments: [Vec<f64>; 3],
}

#[derive(Debug, Clone)]
pub struct HdgSolution {
    pub p: usize,
    pub tau: f64,
    pub elements: Vec<ElementSolution>,
    /// Trace coefficients per facet, `p + 1` each.
    pub trace: Vec<Vec<f64>>,
    /// Number of globally coupled trace unknowns (all facets, Dirichlet included).
    pub n_edge: usize,
}

/// Local matrices `M X = F + G Λ` and flux moments `Q = H X − τ Λ`.
struct LocalOperator {
    m: DMatrix<f64>,
    g: DMatrix<f64>,
    h: DMatrix<f64>,
}

fn local_operator(mesh: &Mesh, k: usize, p: usize, tau: f64) -> LocalOperator {
    let geo = mesh.geometry(k);
    let n = dim_p(p);
    let nf = p + 1;
    let nu_inv = 1.0 / mesh.element_nu(k);
    let quad = 2 * p + 2;
    let eq = ElementQuad::new(geo, p, quad);
    let mut dx = DMatrix::<f64>::zeros(n, n);
    let mut dy = DMatrix::<f64>::zeros(n, n);
    for q in 0..eq.len() {
        let b = eq.at(q);
        let w = eq.weights[q];
        for i in 0..n {
            for kk in 0..n {
                dx[(i, kk)] += w * b[kk].value * b[i].grad[0];
                dy[(i, kk)] += w * b[kk].value * b[i].grad[1];
            }
        }
    }
    let mut m = DMatrix::zeros(3 * n, 3 * n);
    let mut g = DMatrix::zeros(3 * n, 3 * nf);
    let mut h = DMatrix::zeros(3 * nf, 3 * n);
    for i in 0..n {
        m[(i, i)] = nu_inv;
        m[(n + i, n + i)] = nu_inv;
        for kk in 0..n {
            m[(i, 2 * n + kk)] = -dx[(i, kk)];
            m[(n + i, 2 * n + kk)] = -dy[(i, kk)];
            m[(2 * n + i, kk)] = -dx[(i, kk)];
            m[(2 * n + i, n + kk)] = -dy[(i, kk)];
        }
    }
    for f in 0..3 {
        let gf = mesh.element_facets[k][f];
        let (a, b) = mesh.facet_points(gf);
        let fq = FacetQuad::new(geo, a, b, p, p, quad);
        let [nx, ny] = geo.normal[f];
        for q in 0..fq.len() {
            let w = fq.weights[q];
            let eb = fq.elem_at(q);
            let mu = fq.facet_at(q);
            for i in 0..n {
                for kk in 0..n {
                    let mass = w * eb[i].value * eb[kk].value;
                    m[(2 * n + i, kk)] += nx * mass;
                    m[(2 * n + i, n + kk)] += ny * mass;
                    m[(2 * n + i, 2 * n + kk)] += tau * mass;
                }
                for mm in 0..nf {
                    let e = w * eb[i].value * mu[mm];
                    let col = f * nf + mm;
                    g[(i, col)] -= nx * e;
                    g[(n + i, col)] -= ny * e;
                    g[(2 * n + i, col)] += tau * e;
                    h[(col, i)] += nx * e;
                    h[(col, n + i)] += ny * e;
                    h[(col, 2 * n + i)] += tau * e;
                }
            }
        }
    }
    LocalOperator { m, g, h }
}

/// Per-element condensed data: `X = A + B Λ`.
struct Condensed {
    a: DVector<f64>,
    b: DMatrix<f64>,
    /// `τ I − H B`, symmetric positive definite.
    k: DMatrix<f64>,
    /// `H A`.
    r: DVector<f64>,
    h: DMatrix<f64>,
}

fn condense(mesh: &Mesh, k: usize, data: &ProblemData, disc: &Discretization) -> Result<Condensed> {
    let p = disc.p;
    let n = dim_p(p);
    let op = local_operator(mesh, k, p, disc.tau);
    let lu = op.m.clone().lu();
    let mut rhs = DVector::zeros(3 * n);
    if !data.f.is_zero() {
        let eq = ElementQuad::new(mesh.geometry(k), p, disc.data_quad());
        for q in 0..eq.len() {
            let x = eq.points[q];
            let v = check_finite("source term", data.f.eval(x), x)?;
            for (i, b) in eq.at(q).iter().enumerate() {
                rhs[2 * n + i] += eq.weights[q] * v * b.value;
            }
        }
    }
    let a = lu.solve(&rhs).ok_or_else(|| Error::SingularLocal {
        element: k,
        detail: "local HDG matrix is singular".into(),
    })?;
    let b = lu.solve(&op.g).ok_or_else(|| Error::SingularLocal {
        element: k,
        detail: "local HDG matrix is singular".into(),
    })?;
    let nt = 3 * (p + 1);
    let hb = &op.h * &b;
    let mut kk = -hb;
    for i in 0..nt {
        kk[(i, i)] += disc.tau;
    }
    let r = &op.h * &a;
    Ok(Condensed {
        a,
        b,
        k: kk,
        r,
        h: op.h,
    })
}

/// Largest relative asymmetry of the element-condensed matrices.
pub fn condensed_asymmetry(mesh: &Mesh, disc: &Discretization) -> Result<f64> {
    let data = ProblemData::default();
    let mut worst: f64 = 0.0;
    for k in 0..mesh.num_elements() {
        let c = condense(mesh, k, &data, disc)?;
        let max = c.k.amax();
        let diff = (&c.k - c.k.transpose()).amax();
        worst = worst.max(diff / max);
    }
    Ok(worst)
}

/// Dirichlet trace coefficients `Π_e^p g_D` of a boundary facet.
fn dirichlet_trace(mesh: &Mesh, f: usize, g: &DataFn, disc: &Discretization) -> Result<Vec<f64>> {
    if g.is_zero() {
        return Ok(vec![0.0; disc.p + 1]);
    }
    let (a, b) = mesh.facet_points(f);
    let e = crate::fem::project_edge(&g.as_fn(), a, b, disc.p, disc.data_quad())?;
    Ok(e.coeffs)
}

fn neumann_moments(mesh: &Mesh, f: usize, g: &DataFn, disc: &Discretization) -> Result<Vec<f64>> {
    if g.is_zero() {
        return Ok(vec![0.0; disc.p + 1]);
    }
    let facet = &mesh.facets[f];
    let k = facet.elements[0];
    let (a, b) = mesh.facet_points(f);
    let fq = FacetQuad::new(mesh.geometry(k), a, b, 0, disc.p, disc.data_quad());
    facet_moments(&g.as_fn(), &fq)
}

pub fn solve_primal(mesh: &Mesh, data: &ProblemData, disc: &Discretization) -> Result<HdgSolution> {
    let p = disc.p;
    let nf = p + 1;
    let condensed: Vec<Condensed> = (0..mesh.num_elements())
        .into_par_iter()
        .map(|k| condense(mesh, k, data, disc))
        .collect::<Result<_>>()?;

    // Dirichlet facets are eliminated; all others carry p + 1 unknowns.
    let mut dof = vec![usize::MAX; mesh.num_facets()];
    let mut trace = vec![vec![0.0; nf]; mesh.num_facets()];
    let mut rhs_facet = vec![vec![0.0; nf]; mesh.num_facets()];
    let mut ndof = 0;
    for (f, facet) in mesh.facets.iter().enumerate() {
        match facet.tag {
            Some(BoundaryTag::Dirichlet) => trace[f] = dirichlet_trace(mesh, f, &data.g_d, disc)?,
            Some(BoundaryTag::Neumann) => {
                let g = neumann_moments(mesh, f, &data.g_n, disc)?;
                for (r, v) in rhs_facet[f].iter_mut().zip(g) {
                    *r -= v;
                }
                dof[f] = ndof;
                ndof += nf;
            }
            None => {
                dof[f] = ndof;
                ndof += nf;
            }
        }
    }
    let mut rhs = vec![0.0; ndof];
    for (f, r) in rhs_facet.iter().enumerate() {
        if dof[f] != usize::MAX {
            for (m, v) in r.iter().enumerate() {
                rhs[dof[f] + m] += v;
            }
        }
    }
    let mut mat = TripletBuilder::new(ndof);
    for (k, c) in condensed.iter().enumerate() {
        let facets = mesh.element_facets[k];
        for fi in 0..3 {
            let Some(row0) = (dof[facets[fi]] != usize::MAX).then_some(dof[facets[fi]]) else {
                continue;
            };
            for mi in 0..nf {
                let li = fi * nf + mi;
                rhs[row0 + mi] += c.r[li];
                for fj in 0..3 {
                    let gj = facets[fj];
                    for mj in 0..nf {
                        let v = c.k[(li, fj * nf + mj)];
                        if dof[gj] == usize::MAX {
                            rhs[row0 + mi] -= v * trace[gj][mj];
                        } else {
                            mat.add(row0 + mi, dof[gj] + mj, v);
                        }
                    }
                }
            }
        }
    }
    let lambda = mat.solve_spd(&rhs)?;
    for (f, t) in trace.iter_mut().enumerate() {
        if dof[f] != usize::MAX {
            t.copy_from_slice(&lambda[dof[f]..dof[f] + nf]);
        }
    }

    let n = dim_p(p);
    let elements = condensed
        .par_iter()
        .enumerate()
        .map(|(k, c)| {
            let facets = mesh.element_facets[k];
            let mut l = DVector::zeros(3 * nf);
            for fi in 0..3 {
                for m in 0..nf {
                    l[fi * nf + m] = trace[facets[fi]][m];
                }
            }
            let x = &c.a + &c.b * &l;
            let qn = &c.h * &x - &l * disc.tau;
            let flux_moments = [0, 1, 2].map(|fi| (0..nf).map(|m| qn[fi * nf + m]).collect());
            ElementSolution {
                qx: x.rows(0, n).iter().copied().collect(),
                qy: x.rows(n, n).iter().copied().collect(),
                u: x.rows(2 * n, n).iter().copied().collect(),
                flux_moments,
            }
        })
        .collect();
    Ok(HdgSolution {
        p,
        tau: disc.tau,
        elements,
        trace,
        n_edge: mesh.num_facets() * nf,
    })
}

/// Adjoint solve: the primal solver with data `(f^O, g_D^O, −g_N^O)`.
pub fn solve_adjoint(mesh: &Mesh, out: &OutputFunctional, disc: &Discretization) -> Result<HdgSolution> {
    solve_primal(mesh, &out.adjoint_data(), disc)
}

/// `s_h = (f^O, u_h) + ⟨g_D^O, q̂_h·n⟩_D + ⟨g_N^O, u_h⟩_N`.
pub fn raw_output(
    mesh: &Mesh,
    sol: &HdgSolution,
    out: &OutputFunctional,
    disc: &Discretization,
) -> Result<f64> {
    let p = sol.p;
    let quad = disc.data_quad();
    let mut s = 0.0;
    for k in 0..mesh.num_elements() {
        let geo = mesh.geometry(k);
        let el = &sol.elements[k];
        if !out.f_o.is_zero() {
            let eq = ElementQuad::new(geo, p, quad);
            for q in 0..eq.len() {
                let x = eq.points[q];
                s += eq.weights[q] * out.f_o.eval(x) * eq.value(q, &el.u);
            }
        }
        for fi in 0..3 {
            let f = mesh.element_facets[k][fi];
            let (a, b) = mesh.facet_points(f);
            match mesh.facets[f].tag {
                Some(BoundaryTag::Dirichlet) if !out.g_d_o.is_zero() => {
                    let fq = FacetQuad::new(geo, a, b, p, p, quad);
                    let m = facet_moments(&out.g_d_o.as_fn(), &fq)?;
                    s += m.iter().zip(&el.flux_moments[fi]).map(|(a, b)| a * b).sum::<f64>();
                }
                Some(BoundaryTag::Neumann) if !out.g_n_o.is_zero() => {
                    let fq = FacetQuad::new(geo, a, b, p, 0, quad);
                    for q in 0..fq.len() {
                        s += fq.weights[q] * out.g_n_o.eval(fq.points[q]) * fq.elem_value(q, &el.u);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(s)
}

impl HdgSolution {
    /// `max_K |⟨q̂·n, 1⟩_∂K − (f, 1)_K|`.
    pub fn conservation_defect(&self, mesh: &Mesh, data: &ProblemData, quad: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, el) in self.elements.iter().enumerate() {
            let geo = mesh.geometry(k);
            let mut out = 0.0;
            for fi in 0..3 {
                out += el.flux_moments[fi][0] * geo.facet_length[fi].sqrt();
            }
            let eq = ElementQuad::new(geo, 0, quad);
            let src: f64 = (0..eq.len()).map(|q| eq.weights[q] * data.f.eval(eq.points[q])).sum();
            worst = worst.max((out - src).abs());
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{lshape_initial, unit_square_crisscross};
    use std::f64::consts::PI;

    fn linear_data() -> ProblemData {
        ProblemData {
            f: DataFn::zero(),
            g_d: DataFn::polynomial(1, |x| x[0]),
            g_n: DataFn::zero(),
        }
    }

    #[test]
    fn reproduces_linear_solution() {
        let mesh = unit_square_crisscross(0);
        let disc = Discretization::new(1, 1.0).unwrap();
        let sol = solve_primal(&mesh, &linear_data(), &disc).unwrap();
        for (k, el) in sol.elements.iter().enumerate() {
            let geo = mesh.geometry(k);
            for x in [geo.centroid(), geo.vertices[0]] {
                let u = crate::fem::eval::eval_scalar(geo, 1, &el.u, x);
                let qx = crate::fem::eval::eval_scalar(geo, 1, &el.qx, x);
                let qy = crate::fem::eval::eval_scalar(geo, 1, &el.qy, x);
                assert!((u - x[0]).abs() < 1e-10, "u at {x:?}: {u}");
                assert!((qx + 1.0).abs() < 1e-10 && qy.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mesh = lshape_initial();
        let disc = Discretization::new(2, 1.0).unwrap();
        let sol = solve_primal(&mesh, &ProblemData::default(), &disc).unwrap();
        assert!(sol.elements.iter().all(|e| e.u.iter().chain(&e.qx).all(|v| *v == 0.0)));
        assert!(sol.trace.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn local_conservation_and_symmetry() {
        let mesh = unit_square_crisscross(1);
        let data = ProblemData {
            f: DataFn::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
            ..Default::default()
        };
        for p in 0..=3 {
            let disc = Discretization::new(p, 1.0).unwrap();
            let sol = solve_primal(&mesh, &data, &disc).unwrap();
            assert!(sol.conservation_defect(&mesh, &data, disc.data_quad()) < 1e-10);
            assert!(condensed_asymmetry(&mesh, &disc).unwrap() < 1e-12);
        }
    }

    #[test]
    fn l2_error_converges_at_order_p_plus_one() {
        let data = ProblemData {
            f: DataFn::new(|x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin()),
            ..Default::default()
        };
        let exact = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
        for p in 1..=2 {
            let disc = Discretization::new(p, 1.0).unwrap();
            let mut errs = Vec::new();
            for level in 1..=3 {
                let mesh = unit_square_crisscross(level);
                let sol = solve_primal(&mesh, &data, &disc).unwrap();
                let mut e2 = 0.0;
                for (k, el) in sol.elements.iter().enumerate() {
                    let eq = ElementQuad::new(mesh.geometry(k), p, 2 * p + 6);
                    for q in 0..eq.len() {
                        e2 += eq.weights[q] * (eq.value(q, &el.u) - exact(eq.points[q])).powi(2);
                    }
                }
                errs.push(e2.sqrt());
            }
            let rate = (errs[1] / errs[2]).log2();
            assert!((rate - (p as f64 + 1.0)).abs() < 0.3, "p={p} rate {rate}");
        }
    }

    #[test]
    fn self_adjoint_data_gives_identical_solutions() {
        let mesh = lshape_initial();
        let disc = Discretization::new(2, 1.0).unwrap();
        let data = ProblemData {
            f: DataFn::constant(1.0),
            ..Default::default()
        };
        let out = OutputFunctional {
            f_o: DataFn::constant(1.0),
            ..Default::default()
        };
        let a = solve_primal(&mesh, &data, &disc).unwrap();
        let b = solve_adjoint(&mesh, &out, &disc).unwrap();
        for (x, y) in a.elements.iter().zip(&b.elements) {
            for (u, v) in x.u.iter().zip(&y.u) {
                assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn rejects_non_positive_tau() {
        assert!(Discretization::new(1, 0.0).is_err());
        assert!(Discretization::new(1, -1.0).is_err());
    }
}
