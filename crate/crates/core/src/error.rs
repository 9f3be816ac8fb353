use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite scalar input {0}")]
    NonFinite(f64),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("separation violated between centers {i} and {j}: torus distance {distance:.6} < 5R = {required:.6}")]
    Separation {
        i: usize,
        j: usize,
        distance: f64,
        required: f64,
    },

    #[error("nehari projection failed: {0}")]
    Nehari(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolver { iterations: usize, residual: f64 },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bumps unresolved at R = {radius}: new peak at torus distance {distance:.4} < 2R from center {existing}")]
    Unresolved {
        radius: f64,
        distance: f64,
        existing: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed field file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
