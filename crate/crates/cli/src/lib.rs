//! Command-line front end for short-lived signatures: file formats and
//! command handlers behind the `sls` binary.

pub mod commands;
pub mod formats;

use std::fmt;

pub use commands::{run, Cli};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input files.
    Usage(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) | CliError::Internal(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<formats::FormatError> for CliError {
    fn from(e: formats::FormatError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<sls_core::Error> for CliError {
    fn from(e: sls_core::Error) -> Self {
        use sls_core::Error as E;
        match e {
            E::SecurityParameterTooSmall { .. }
            | E::TimeBoundTooLarge(_)
            | E::SampleTooSmall { .. }
            | E::InvalidPeriod
            | E::Parse(_)
            | E::BeaconRoundUnavailable { .. }
            | E::KeyMismatch
            | E::ClockSkew { .. } => CliError::Usage(e.to_string()),
            other => CliError::Internal(other.to_string()),
        }
    }
}
