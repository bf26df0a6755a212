//! Commands behind the `miniformer` binary: `train`, `translate`, `score`
//! and `params`.
//!
//! A training run writes everything into its output directory:
//! `checkpoint.bin`, `vocab.src`, `vocab.tgt`, `train.log`,
//! `config.resolved`, plus the held-out split as `test.src` / `test.ref`.
//! Running two commands against the same output directory at once is not
//! supported.

mod commands;
mod config;

pub use commands::{cmd_params, cmd_score, cmd_train, cmd_translate, TrainSummary, SEED_ENV};
pub use config::RunConfig;

use std::fmt;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;

/// A single-line diagnostic with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl fmt::Display) -> Self {
        CliError {
            code,
            message: message.to_string(),
        }
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(EXIT_CONFIG, message)
    }

    pub fn data(message: impl fmt::Display) -> Self {
        Self::new(EXIT_DATA, message)
    }
}

impl From<miniformer::Error> for CliError {
    fn from(e: miniformer::Error) -> Self {
        use miniformer::Error as E;
        let code = match &e {
            E::Config(_)
            | E::Contract(_)
            | E::Format(_)
            | E::VersionMismatch { .. }
            | E::Truncated(_)
            | E::UnknownParameter(_) => EXIT_CONFIG,
            E::Data(_) | E::Io(_) => EXIT_DATA,
            E::Divergence(_) => EXIT_DIVERGENCE,
            _ => EXIT_FAILURE,
        };
        CliError::new(code, e)
    }
}
