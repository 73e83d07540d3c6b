use thiserror::Error;

/// Errors raised by the simulator, fitters and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("invalid circuit: {0}")]
    Circuit(String),

    #[error("invalid cut: {0}")]
    Cut(String),

    #[error("tomographically incomplete basis: frame rank {rank} of {dim}")]
    IncompleteBasis { rank: usize, dim: usize },

    #[error("singular assignment matrix (determinant {det:.3e})")]
    SingularAssignment { det: f64 },

    #[error("contraction failed: {0}")]
    Contraction(String),

    #[error("reconstruction unusable: raw probability mass {mass:.3e}")]
    NonPositiveMass { mass: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
