use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("chain length {len} exceeds the dense limit of {max} sites")]
    TooLarge { len: usize, max: usize },

    #[error("invalid kink pattern: {0}")]
    InvalidPattern(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("site {site} out of range for a chain of {len} sites")]
    SiteOutOfRange { site: usize, len: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tolerance {tol:.1e} not reachable within bond dimension {max_bond}")]
    BondDimension { tol: f64, max_bond: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("spectral analysis: {0}")]
    Spectral(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
