use alloc::string::String;

/// Errors reported by the models and simulators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter violates its precondition. `field` names the offender.
    #[error("invalid `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// Exact enumeration over cache profiles would exceed the work limit.
    #[error(
        "exact enumeration needs {profiles:.3e} cache profiles (limit {limit:.0e}); \
         use the Monte Carlo estimator with at least {suggested_mc_samples} samples"
    )]
    EnumerationInfeasible {
        profiles: f64,
        limit: f64,
        suggested_mc_samples: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    /// Name of the offending field, when the error is a validation failure.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::InvalidParameter { field, .. } => Some(field),
            Error::EnumerationInfeasible { .. } => None,
        }
    }
}
