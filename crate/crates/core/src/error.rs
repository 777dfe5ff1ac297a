use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("nome out of range: |rho| = {0} must be < 1")]
    NomeOutOfRange(f64),

    #[error("theta series needs more than {cap} terms (|rho| = {rho}); use the accelerated evaluation")]
    NonConvergence { rho: f64, cap: usize },

    #[error("period matrix imaginary part is not positive definite (smallest eigenvalue {0})")]
    PeriodNotConvergent(f64),

    #[error("Zak sum did not converge within {0} terms")]
    SlowDecay(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sector mismatch: {0}")]
    SectorMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
