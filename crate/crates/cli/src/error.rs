use memmarket::Error;

/// Failures mapped to process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("numerical regime error: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let text = e.to_string();
        match e {
            Error::InvalidParameter(_) | Error::UnsupportedKernel(_) | Error::LengthMismatch { .. } => {
                CliError::Config(text)
            }
            Error::Precondition(_) | Error::BudgetExceeded { .. } | Error::NoViolation { .. } => {
                CliError::Precondition(text)
            }
            Error::NonPositiveFactor { .. }
            | Error::Domain(_)
            | Error::QuadratureBudget { .. }
            | Error::IdenticallyZero
            | Error::InsufficientData(_) => CliError::Numerical(text),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}
