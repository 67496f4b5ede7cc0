use thiserror::Error;

/// Errors raised anywhere in the solve / reconstruct / bound pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("mark set references element {index} but the mesh has {count} elements")]
    BadMark { index: usize, count: usize },

    #[error("non-finite value {value} from {what} at ({x}, {y})")]
    NonFinite {
        what: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error("singular local system on element {element}: {detail}")]
    SingularLocal { element: usize, detail: String },

    #[error("skeleton solve failed ({dofs} unknowns): {detail}")]
    SkeletonSolve { dofs: usize, detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("Dirichlet band construction failed: {0}")]
    Band(String),

    #[error("representation bounds are not guaranteed here: {0}")]
    NotPolynomialData(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("parse error on line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
