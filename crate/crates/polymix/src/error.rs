use thiserror::Error;

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Unresolvable(String),
}

impl CliError {
    /// 1 verification failure, 2 validation error, 3 I/O error,
    /// 4 resolvability refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io(_) => 3,
            CliError::Unresolvable(_) => 4,
        }
    }
}

impl From<polymix_core::Error> for CliError {
    fn from(e: polymix_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub(crate) fn io_err(what: impl std::fmt::Display, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{what}: {e}"))
}

pub(crate) fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
