use std::fmt;

use talisman::Error;

/// Exit codes: 2 for invalid input or configuration, 3 for unreadable or
/// malformed files, 1 for internal failures.
#[derive(Debug)]
pub enum CliError {
    Engine(Error),
    Csv(csv::Error),
    Usage(String),
    VerificationFailed(usize),
    Internal(String),
}

impl CliError {
    pub fn name(&self) -> &'static str {
        match self {
            CliError::Engine(e) => e.name(),
            CliError::Csv(_) => "Io",
            CliError::Usage(_) => "UsageError",
            CliError::VerificationFailed(_) => "VerificationFailed",
            CliError::Internal(_) => "Internal",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine(Error::Io(_) | Error::Json(_) | Error::Format(_)) => 3,
            CliError::Engine(_) | CliError::Usage(_) => 2,
            CliError::Csv(_) => 3,
            CliError::VerificationFailed(_) | CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Engine(e) => write!(f, "{e}"),
            CliError::Csv(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
            CliError::VerificationFailed(n) => write!(f, "{n} verification check(s) failed"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Engine(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Engine(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Engine(Error::Json(e))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
