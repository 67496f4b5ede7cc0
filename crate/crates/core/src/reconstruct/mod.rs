//! Potential and projected-equilibrated flux reconstructions.

pub mod band;
pub mod flux;
pub mod optimize;
pub mod potential;

pub use band::{enforce_all_bands, enforce_dirichlet_band, AxisLine};
pub use flux::{reconstruct_flux, EquilibratedFlux, FluxAudit};
pub use optimize::local_optimize;
pub use potential::{
    make_continuous, postprocess_potential, ContinuousPotential, NodeMap, PotentialAudit,
};

use crate::data::DataFn;
use crate::error::Result;
use crate::hdg::HdgSolution;
use crate::mesh::Mesh;

/// Flux reconstruction plus Dirichlet-exact continuous potential for one solution.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub flux: EquilibratedFlux,
    pub potential: ContinuousPotential,
}

pub fn reconstruct(mesh: &Mesh, sol: &HdgSolution, g_d: &DataFn) -> Result<Reconstruction> {
    let flux = reconstruct_flux(mesh, sol)?;
    let ustar = postprocess_potential(mesh, sol, &flux)?;
    let mut potential = make_continuous(mesh, &ustar, g_d);
    enforce_all_bands(&mut potential, mesh, g_d)?;
    Ok(Reconstruction { flux, potential })
}
