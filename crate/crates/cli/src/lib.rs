//! Experiment runner for the lamesolve checks.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod report;

use thiserror::Error;

/// Exit codes: 0 all checks pass, 2 a check failed, 3 parameter or
/// configuration error, 4 IO error, 5 unknown experiment.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] lamesolve::Error),
    #[error("io error: {0}")]
    Io(String),
    #[error("unknown experiment '{0}' (see --list)")]
    UnknownExperiment(String),
    #[error("{0}")]
    Usage(String),
}

pub const EXIT_FAIL: i32 = 2;
pub const EXIT_PARAM: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_UNKNOWN: i32 = 5;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use lamesolve::Error as E;
        match self {
            CliError::Core(E::Param(_) | E::Config(_) | E::Input(_)) | CliError::Usage(_) => EXIT_PARAM,
            CliError::Core(_) => EXIT_FAIL,
            CliError::Io(_) => EXIT_IO,
            CliError::UnknownExperiment(_) => EXIT_UNKNOWN,
        }
    }
}
