use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter violation: {0}")]
    ParameterViolation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("quadrature did not converge on [{a}, {b}] within depth {depth}")]
    NonConvergence { a: f64, b: f64, depth: usize },

    #[error("matrix is not symmetric: {0}")]
    NonSymmetric(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no feasible delay found while probing {probes} points in [{low}, {high}]")]
    NoFeasiblePoint { probes: usize, low: f64, high: f64 },

    #[error("interval [{low}, {high}] is not certified by the delay-range conditions")]
    CertificationFailure { low: f64, high: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
