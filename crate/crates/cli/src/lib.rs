//! Scenario configs, the named property suite and the workflows behind the
//! `polycal` command-line tool.

pub mod config;
pub mod error;
pub mod run;
pub mod suite;

pub use config::LoadedConfig;
pub use error::{CliError, Result};
