//! Experiment driver for the `condensate-fp` command-line tool.
//!
//! Each command reads an [`ExperimentConfig`], writes plot-ready CSV files whose
//! `#` header echoes the resolved configuration, and returns the paths it wrote.

use thiserror::Error;

pub mod commands;
pub mod config;
pub mod csv;
pub mod validate;

pub use commands::{cmd_evolve, cmd_stationary, cmd_sweep, cmd_threshold, cmd_validate, run_command};
pub use config::{parse_config, ExperimentConfig, Mode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for configuration and validation errors, 2 for numerical or i/o failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

pub(crate) fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}
