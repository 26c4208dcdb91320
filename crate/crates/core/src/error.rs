use thiserror::Error;

/// Errors produced by the interpolation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value outside the domain of a function (negative radius, NaN coordinate, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration parameter violates its constraints.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// The matrix is numerically singular; `pivot` is the failing elimination step.
    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },

    /// Subdomain factorization failed while building the preconditioner.
    #[error("subdomain ({ix}, {iy}) could not be factorized: {source}")]
    Subdomain {
        ix: usize,
        iy: usize,
        #[source]
        source: Box<Error>,
    },

    /// The Arnoldi process produced a zero vector before the residual target was met.
    #[error("GMRES breakdown at iteration {iteration} with residual {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },

    /// An operator or preconditioner produced a non-finite value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
