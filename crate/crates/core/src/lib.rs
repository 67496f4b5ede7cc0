pub mod adapt;
pub mod bounds;
pub mod data;
pub mod error;
pub mod expr;
pub mod fem;
pub mod hdg;
pub mod linalg;
pub mod mesh;
pub mod pipeline;
pub mod problems;
pub mod reconstruct;

pub use data::{DataFn, OutputFunctional, ProblemData};
pub use error::{Error, Result};
pub use hdg::{solve_adjoint, solve_primal, Discretization, HdgSolution};
pub use mesh::{BoundaryTag, Mesh};
