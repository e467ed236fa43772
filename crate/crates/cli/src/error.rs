use std::process::ExitCode;

use stoken::adversary::AdversaryError;
use stoken::security::BoundError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("security precondition violated: {0}")]
    Security(String),
    #[error("{0} golden value(s) out of tolerance")]
    GoldenMismatch(usize),
    #[error("simulation failed: {0}")]
    Runtime(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Security(_) => 3,
            CliError::GoldenMismatch(_) => 4,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        })
    }
}

impl From<BoundError> for CliError {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Constraint(_) | BoundError::PBoundNotBelowOne(_) => {
                CliError::Security(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<AdversaryError> for CliError {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Bound(b) => b.into(),
            AdversaryError::Invalid(m) => CliError::Config(format!("adversary: {m}")),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
