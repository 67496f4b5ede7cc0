#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;

use hdg_bounds::pipeline::Evaluation;
use hdg_bounds::fem::quadrature::line_rule;
use hdg_bounds::fem::ElementQuad;
use hdg_bounds::mesh::crisscross;
use hdg_bounds::{BoundaryTag, DataFn, Mesh, OutputFunctional, ProblemData};

/// Largest reconstruction residuals seen over a set of meshes.
#[derive(Debug, Clone, Copy, Default)]
pub struct AuditMax {
    pub divergence: f64,
    pub normal_jump: f64,
    pub neumann: f64,
    pub dirichlet: f64,
    pub continuity: f64,
    pub meshes: usize,
}

pub const AUDIT_TOL: f64 = 1e-10;

impl AuditMax {
    pub fn add(&mut self, mesh: &Mesh, data: &ProblemData, out: &OutputFunctional, eval: &Evaluation) {
        let quad = 2 * eval.primal.p + 4;
        let adjoint_data = out.adjoint_data();
        for (rec, d) in [(&eval.primal_rec, data), (&eval.adjoint_rec, &adjoint_data)] {
            let f = rec.flux.audit(mesh, d, quad).expect("flux audit");
            let u = rec.potential.audit(mesh, &d.g_d, quad);
            self.divergence = self.divergence.max(f.divergence);
            self.normal_jump = self.normal_jump.max(f.normal_jump);
            self.neumann = self.neumann.max(f.neumann);
            self.dirichlet = self.dirichlet.max(u.dirichlet);
            self.continuity = self.continuity.max(u.continuity);
        }
        self.meshes += 1;
    }

    pub fn merge(&mut self, o: &AuditMax) {
        self.divergence = self.divergence.max(o.divergence);
        self.normal_jump = self.normal_jump.max(o.normal_jump);
        self.neumann = self.neumann.max(o.neumann);
        self.dirichlet = self.dirichlet.max(o.dirichlet);
        self.continuity = self.continuity.max(o.continuity);
        self.meshes += o.meshes;
    }

    pub fn ok(&self) -> bool {
        [self.divergence, self.normal_jump, self.neumann, self.dirichlet, self.continuity]
            .iter()
            .all(|v| *v <= AUDIT_TOL)
    }

    pub fn summary(&self) -> String {
        format!(
            "{} meshes; div {:.1e}, jump {:.1e}, neumann {:.1e}, dirichlet {:.1e}, continuity {:.1e}",
            self.meshes, self.divergence, self.normal_jump, self.neumann, self.dirichlet, self.continuity
        )
    }
}

/// Writes a result line straight to stderr so it shows without `--nocapture`.
pub fn report(criterion: u32, ok: bool, title: &str, detail: &str) {
    let status = if ok { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "criterion {criterion} [{status}] {title}: {detail}");
}

/// `−2 × slope` of a least-squares fit of `ln e` against `ln n`.
pub fn fitted_order(points: &[(usize, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    -2.0 * sxy / sxx
}

/// Polynomial `Σ c_ij x^i y^j`.
#[derive(Clone)]
pub struct Poly(pub Vec<(usize, usize, f64)>);

impl Poly {
    /// Deterministic full polynomial of total degree `p`.
    pub fn sample(p: usize, seed: f64) -> Self {
        let mut terms = Vec::new();
        for i in 0..=p {
            for j in 0..=p - i {
                terms.push((i, j, ((seed + 1.7 * i as f64 + 0.9 * j as f64).sin() * 1.3 + 0.2)));
            }
        }
        Self(terms)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.0.iter().map(|&(i, j, c)| c * x[0].powi(i as i32) * x[1].powi(j as i32)).sum()
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for &(i, j, c) in &self.0 {
            if i > 0 {
                g[0] += c * i as f64 * x[0].powi(i as i32 - 1) * x[1].powi(j as i32);
            }
            if j > 0 {
                g[1] += c * j as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 1);
            }
        }
        g
    }

    pub fn laplacian(&self, x: [f64; 2]) -> f64 {
        let mut l = 0.0;
        for &(i, j, c) in &self.0 {
            if i > 1 {
                l += c * (i * (i - 1)) as f64 * x[0].powi(i as i32 - 2) * x[1].powi(j as i32);
            }
            if j > 1 {
                l += c * (j * (j - 1)) as f64 * x[0].powi(i as i32) * x[1].powi(j as i32 - 2);
            }
        }
        l
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|t| t.0 + t.1).max().unwrap_or(0)
    }
}

pub fn on_right(x: [f64; 2]) -> bool {
    (x[0] - 1.0).abs() < 1e-12
}

/// Criss-cross unit square with diffusivity `nu` and a Neumann right edge.
pub fn neumann_square(n: usize, nu: f64) -> Mesh {
    let base = crisscross(n);
    let boundary: Vec<([usize; 2], BoundaryTag)> = base
        .boundary_edges()
        .into_iter()
        .map(|(e, _)| {
            let tag = if on_right(base.vertices[e[0]]) && on_right(base.vertices[e[1]]) {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            };
            (e, tag)
        })
        .collect();
    Mesh::new(base.vertices, base.elements, base.regions, BTreeMap::from([(0, nu)]), &boundary).unwrap()
}

/// Problem data with exact solution `u`: `−ν∆u = f`, `u = g_D`, `−ν∂u/∂n = g_N` on `x = 1`.
pub fn manufactured(u: &Poly, nu: f64) -> ProblemData {
    let d = u.degree();
    let (a, b, c) = (u.clone(), u.clone(), u.clone());
    ProblemData {
        f: DataFn::polynomial(d.saturating_sub(2), move |x| -nu * a.laplacian(x)),
        g_d: DataFn::polynomial(d, move |x| b.eval(x)).with_grad({
            let u = u.clone();
            move |x| u.grad(x)
        }),
        g_n: DataFn::polynomial(d.saturating_sub(1), move |x| -nu * c.grad(x)[0]),
    }
}

pub fn exact_output(mesh: &Mesh, u: &Poly, out: &OutputFunctional, nu: f64, deg: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..mesh.num_elements() {
        let q = ElementQuad::new(mesh.geometry(k), 0, deg);
        for (x, w) in q.points.iter().zip(&q.weights) {
            s += w * out.f_o.eval(*x) * u.eval(*x);
        }
    }
    let rule = line_rule(deg);
    for f in 0..mesh.num_facets() {
        let Some(tag) = mesh.facets[f].tag else { continue };
        let (a, b) = mesh.facet_points(f);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        // Outward normal of the unit square.
        let n = if (mid[0] - 1.0).abs() < 1e-12 {
            [1.0, 0.0]
        } else if mid[0].abs() < 1e-12 {
            [-1.0, 0.0]
        } else if (mid[1] - 1.0).abs() < 1e-12 {
            [0.0, 1.0]
        } else {
            [0.0, -1.0]
        };
        for (t, w) in rule.iter() {
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            let g = u.grad(x);
            s += w * len
                * match tag {
                    BoundaryTag::Dirichlet => out.g_d_o.eval(x) * -nu * (g[0] * n[0] + g[1] * n[1]),
                    BoundaryTag::Neumann => out.g_n_o.eval(x) * u.eval(x),
                };
        }
    }
    s
}
