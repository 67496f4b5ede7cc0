//! One pass of the bounding procedure on a fixed mesh.

use crate::bounds::{compute_bounds, BoundsResult, EtaMode};
use crate::data::{OutputFunctional, ProblemData};
use crate::error::{Error, Result};
use crate::hdg::{raw_output, solve_adjoint, solve_primal, Discretization, HdgSolution};
use crate::mesh::Mesh;
use crate::reconstruct::{local_optimize, reconstruct, Reconstruction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    pub disc: Discretization,
    pub optimize: bool,
    pub mode: EtaMode,
}

impl Settings {
    pub fn new(p: usize, tau: f64) -> Result<Self> {
        Ok(Self {
            disc: Discretization::new(p, tau)?,
            optimize: false,
            mode: EtaMode::Projected,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub primal: HdgSolution,
    pub adjoint: HdgSolution,
    pub primal_rec: Reconstruction,
    pub adjoint_rec: Reconstruction,
    pub bounds: BoundsResult,
    /// `ℓ^O(u_h, q_h)` with the numerical boundary flux.
    pub s_h: f64,
    pub nel: usize,
    /// Trace unknowns over all facets.
    pub n_edge: usize,
}

pub fn evaluate(
    mesh: &Mesh,
    data: &ProblemData,
    out: &OutputFunctional,
    settings: &Settings,
) -> Result<Evaluation> {
    mesh.check()?;
    if !mesh.facets.iter().any(|f| f.tag == Some(crate::mesh::BoundaryTag::Dirichlet)) {
        return Err(Error::Mesh("the Dirichlet boundary is empty".into()));
    }
    let disc = &settings.disc;
    let quad = disc.data_quad();
    let primal = solve_primal(mesh, data, disc)?;
    let adjoint = solve_adjoint(mesh, out, disc)?;
    let mut primal_rec = reconstruct(mesh, &primal, &data.g_d)?;
    let mut adjoint_rec = reconstruct(mesh, &adjoint, &out.g_d_o)?;
    if settings.optimize {
        for rec in [&mut primal_rec, &mut adjoint_rec] {
            let (f, p, _) = local_optimize(mesh, &rec.flux, &rec.potential, quad)?;
            rec.flux = f;
            rec.potential = p;
        }
    }
    let bounds = compute_bounds(mesh, disc.p, &primal_rec, &adjoint_rec, data, out, quad, settings.mode)?;
    let s_h = raw_output(mesh, &primal, out, disc)?;
    Ok(Evaluation {
        n_edge: primal.n_edge,
        nel: mesh.num_elements(),
        primal,
        adjoint,
        primal_rec,
        adjoint_rec,
        bounds,
        s_h,
    })
}
