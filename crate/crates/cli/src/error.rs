use d2dcache_core::Error as CoreError;

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 2.
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    /// Exit code 3.
    #[error("{0}")]
    Infeasible(String),
    /// Exit code 1.
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Infeasible(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    /// Maps a core error raised while checking one config section,
    /// qualifying the field with the section name.
    pub fn in_section(section: &'static str) -> impl Fn(CoreError) -> CliError {
        move |e| match e {
            CoreError::InvalidParameter { field, reason } => {
                CliError::validation(format!("{section}.{field}"), reason)
            }
            other => CliError::from(other),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { field, reason } => CliError::validation(field, reason),
            e @ CoreError::EnumerationInfeasible { .. } => {
                CliError::Infeasible(format!("{e}; set random.method = \"mc\""))
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}
