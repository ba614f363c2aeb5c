use std::path::PathBuf;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain specification: {0}")]
    InvalidSpec(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid stencil size {n} for a node set of {available} nodes")]
    InvalidSize { n: usize, available: usize },

    #[error("degenerate stencil seeded at node {seed}: saddle matrix is singular")]
    DegenerateStencil { seed: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("singular matrix (pivot {pivot:e} at column {col})")]
    SingularMatrix { col: usize, pivot: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("ILU(0) failed at row {row}: {reason}")]
    PreconditionerFailure { row: usize, reason: String },

    #[error("{solver} failed after {iterations} iterations (relative residual {residual:e}): {reason}")]
    SolverFailure {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        reason: String,
        history: Vec<f64>,
    },

    #[error("time step to t = {time} failed")]
    TimeStep {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("matrix of size {size} exceeds the dense eigensolver limit of {limit}; use the Gershgorin report instead")]
    TooLarge { size: usize, limit: usize },

    #[error("reference vector has zero norm")]
    ZeroReference,

    #[error("least-squares or interpolation fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
