//! `molpc` command-line tool: codec checks, corpus building, training,
//! sampling, evaluation and sequence-length benchmarks, all driven by one
//! TOML run configuration.

pub mod commands;
pub mod config;
pub mod data;
mod error;

pub use commands::{run, Cli, VERSION};
pub use config::RunConfig;
pub use error::CliError;
