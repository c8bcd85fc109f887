//! Driver behind the `sinhpoisson` binary. Each command writes its outputs
//! and a manifest into the output directory; nothing in the outputs depends
//! on the clock or the environment.

pub mod commands;
pub mod config;

use thiserror::Error;

pub use commands::run;
pub use config::{merge, parse_config_text, Command, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(sinhpoisson::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl From<sinhpoisson::Error> for CliError {
    fn from(e: sinhpoisson::Error) -> Self {
        use sinhpoisson::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::InvalidConfiguration(_)
            | E::OutOfDomain(_)
            | E::SingularPoint(_)
            | E::MeshTooLarge { .. }
            | E::Parse(_) => CliError::Config(e.to_string()),
            E::NonConvergence { .. } | E::SingularJacobian | E::Overflow(_) | E::NonFinite(_) => {
                CliError::NonConvergence(e.to_string())
            }
            E::AmbiguousZero(_) | E::MissingPeak(_) => CliError::Verification(e.to_string()),
            _ => CliError::Core(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}
