//! Reference-element machinery: quadrature, orthonormal bases, projections,
//! Lagrange interpolation and Raviart–Thomas spaces.

pub mod basis;
pub mod element;
pub mod eval;
pub mod lagrange;
pub mod projection;
pub mod quadrature;
pub mod rt;

pub use basis::{dim_p, BasisEval};
pub use element::{poincare_constants, AffineMap, ElementGeometry, LOCAL_FACETS};
pub use eval::{ElementQuad, FacetQuad};
pub use projection::{project_edge, project_element, EdgePoly, ScalarPoly, VectorPoly};
pub use quadrature::QuadratureRule;
pub use rt::RtSpace;
