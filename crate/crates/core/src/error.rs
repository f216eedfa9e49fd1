use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("quadrature did not converge: last two estimates {prev} and {last}")]
    NoConvergence { prev: f64, last: f64 },
    #[error("massless vacuum rejected: the 1+1 two-point function is infrared divergent for m = {0}")]
    InfraredDivergent(f64),
    #[error("word degree {degree} exceeds the bound {bound}")]
    DegreeBound { degree: usize, bound: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown label {0}")]
    UnknownLabel(String),
    #[error("state has no symmetric two-point data")]
    MasslessState,
    #[error("covariance is not positive semidefinite: smallest eigenvalue {0:e}")]
    NotPsd(f64),
    #[error("CFL violation: dt/dx = {0}")]
    Cfl(f64),
    #[error("{0}")]
    Geometry(String),
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("operation {index}: {source}")]
    Operation { index: usize, source: Box<Error> },
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
