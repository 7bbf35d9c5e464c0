//! Configuration, orchestration and output for Steklov band-structure studies.

pub mod commands;
pub mod config;
pub mod output;
pub mod study;

use steklov_core::BandError;
use thiserror::Error;

pub use commands::{execute, run, Check, Command, RunOutput, Status};
pub use config::JobConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("computation failed: {0}")]
    Compute(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub(crate) fn from_band(e: BandError) -> Self {
        match e {
            BandError::InvalidEps(_) | BandError::EmptyGrid | BandError::EtaOutOfRange(_) | BandError::NoModes => {
                CliError::Config(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }

    /// 2 for configuration problems, 3 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 3,
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
