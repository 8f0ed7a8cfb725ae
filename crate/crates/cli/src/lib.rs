//! File formats, configuration and commands behind the `emcl` binary.

pub mod cli;
pub mod commands;
pub mod config;
pub mod embedding;
pub mod error;
pub mod fsio;
pub mod manifest;

pub use error::{CliError, Result};
