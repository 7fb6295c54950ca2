//! Batch front end for rvmlab: strict JSON run configurations, command
//! dispatch and flat CSV outputs.

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

pub use commands::{run, Command, Outcome};
pub use config::{ConfigError, RunConfig};
