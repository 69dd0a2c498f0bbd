//! Frontend for `saddle-core`: JSON run configurations, the subcommands and
//! deterministic reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

pub use commands::{execute, Cli};
pub use error::{CliError, CliResult};
