//! Error types shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Matrix dimensions do not conform.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An input contained NaN or infinite entries.
    #[error("non-finite entries in {what}")]
    NonFinite { what: String },

    /// The iterative SVD kernel failed to converge.
    #[error("SVD did not converge within {iterations} iterations")]
    SvdNonConvergence { iterations: usize },

    /// A Cholesky pivot was not positive.
    #[error("matrix not positive definite: pivot {index} is {value:.3e} (shift nu = {shift:.3e})")]
    NotPositiveDefinite { index: usize, value: f64, shift: f64 },

    /// A symmetric input was not symmetric to tolerance.
    #[error("matrix not symmetric: max asymmetry {defect:.3e}")]
    NotSymmetric { defect: f64 },

    /// Singular values collapsed below the usable floor.
    #[error("degenerate spectrum: singular value {index} is {value:.3e}, below {floor:.3e}")]
    DegenerateSpectrum { index: usize, value: f64, floor: f64 },

    /// A sketch-size budget cannot be met.
    #[error("budget too small: {0}")]
    Budget(String),

    /// A row stream violated its contract.
    #[error("row stream error: {0}")]
    Stream(String),

    /// A file had an invalid format.
    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
