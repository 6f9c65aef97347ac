use thiserror::Error;

/// Failures of a command-line run, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or a request beyond supported limits.
    #[error("input error: {0}")]
    Input(String),

    /// An exact identity failed; this points at a defect, not at the input.
    #[error("assertion failed: {0}")]
    Violation(String),

    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Violation(_) => 1,
            CliError::Input(_) | CliError::Output(_) => 2,
        }
    }
}

impl From<qvar_core::Error> for CliError {
    fn from(e: qvar_core::Error) -> Self {
        match e {
            qvar_core::Error::Violation(_) | qvar_core::Error::NonFiniteCost => CliError::Violation(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
