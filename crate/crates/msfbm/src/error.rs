use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped so that a front end can map them onto exit
/// statuses: structural and admissibility problems, simulation problems and
/// estimation problems.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrices or series with inconsistent shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// Parameters that fail one or more admissibility conditions.
    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),
    /// Arguments outside the domain of a formula.
    #[error("out of domain: {0}")]
    Domain(String),
    /// The circulant embedding needed to clip too much negative spectrum.
    #[error("circulant embedding failed: relative clipped spectral mass {clipped:.3e} exceeds {limit:.1e}")]
    Embedding { clipped: f64, limit: f64 },
    /// A log-field value large enough to overflow `exp`.
    #[error("overflow guard: {0}")]
    Overflow(String),
    /// A calibration that could not produce an estimate.
    #[error("calibration failed: {0}")]
    Calibration(String),
    /// Malformed input data.
    #[error("invalid data: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
