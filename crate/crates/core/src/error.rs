use thiserror::Error;

/// Failure modes shared by every module.
///
/// The split between [`Error::Invalid`] and [`Error::Inapplicable`] mirrors the
/// CLI exit codes: the first is a malformed input, the second a well-formed
/// input for which the requested quantity does not exist (a divergent moment,
/// a violated hypothesis).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("inapplicable: {0}")]
    Inapplicable(String),

    #[error("non-integrable segment {index}: {reason}")]
    NonIntegrable { index: usize, reason: String },

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    CovarianceInvalid { min_eigenvalue: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn inapplicable(msg: impl Into<String>) -> Self {
        Error::Inapplicable(msg.into())
    }

    /// Whether the error signals missing mathematical preconditions rather
    /// than malformed input.
    pub fn is_inapplicable(&self) -> bool {
        matches!(self, Error::Inapplicable(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
