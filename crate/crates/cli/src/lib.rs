//! Command-line front end: configuration, run orchestration and output.
pub mod builtin;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_convergence, cmd_run, cmd_validate, Overrides};
pub use error::CliError;
