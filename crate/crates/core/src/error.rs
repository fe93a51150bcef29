use thiserror::Error;

/// Errors raised by the numerical routines and the command-line front end.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A biorthogonal index is out of range for the model dimension.
    #[error("index {index} out of range (allowed 0..={max})")]
    Index { index: usize, max: usize },

    /// A series reached its term cap before meeting the requested tolerance.
    #[error("series did not converge after {terms} terms (last relative term {achieved:e}, best value {best})")]
    NonConvergence { terms: usize, achieved: f64, best: f64 },

    /// Quadrature could not certify the requested tolerance.
    #[error("quadrature tolerance not met: value {value}, error estimate {err_est:e}")]
    Tolerance { value: f64, err_est: f64 },

    /// The requested evaluation needs double-double precision.
    #[error("precision insufficient: {0} (rerun with precision=double-double)")]
    PrecisionInsufficient(String),

    /// Coincident squared singular values in a determinant formula.
    #[error("degenerate singular values (minimum gap {gap:e}); use the epsilon-perturbation path")]
    Degenerate { gap: f64 },

    /// A matrix decomposition failed or the draw was numerically singular.
    #[error("decomposition failure: {0}")]
    Decomposition(String),

    /// Invalid configuration or parameters.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
