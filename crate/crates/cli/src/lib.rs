//! Library side of the `spectra-inv` command-line tool.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{run, Failures, RunError};
pub use config::{parse_config, Command, ConfigError, RunConfig};
