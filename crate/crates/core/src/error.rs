use thiserror::Error;

/// Errors produced by the optomechanics library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter violates its physical invariant.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The linear system at some Fourier frequency is singular.
    #[error("singular linear system at omega = {omega:e} rad/s")]
    Singular { omega: f64 },

    /// Two spectra or traces that must share a grid do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A computed symmetrized auto-spectrum carries an imaginary part.
    #[error("internal consistency: {0}")]
    Consistency(String),

    /// The integration band is too narrow for the spectral tails.
    #[error("bandwidth: {0}")]
    Bandwidth(String),

    #[error("calibration: {0}")]
    Calibration(String),

    /// Time-domain grid does not satisfy the sampling requirements.
    #[error("sampling: {0}")]
    Sampling(String),

    /// Response has not decayed inside the time window.
    #[error("truncation: {0}")]
    Truncation(String),

    /// Fit parameterization is degenerate (rank-deficient Jacobian).
    #[error("degenerate fit: {0}")]
    Degenerate(String),

    /// Too many Monte-Carlo draws failed.
    #[error("monte carlo instability: {failed} of {total} draws failed")]
    Instability { failed: usize, total: usize },

    /// Malformed input file or configuration text.
    #[error("parse error (line {line}): {reason}")]
    Parse { line: usize, reason: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by invalid input rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Domain(_)
                | Error::Shape(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Sampling(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
