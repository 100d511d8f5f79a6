//! Command-line harness around `sigma_flow`: config parsing, the five
//! subcommands, and the CSV / summary writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{execute, Invocation, Overrides};
pub use config::{Command, RunConfig};
pub use error::CliError;
