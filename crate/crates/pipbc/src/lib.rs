//! Scenario files, the `pipbc` command line, CSV traces, text reports and
//! parallel sweeps on top of [`pipbc_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod report;
pub mod scenario;
pub mod sweep;

pub use pipbc_core;
pub use config::ScenarioConfig;
pub use error::CliError;
pub use scenario::{CustomPlant, Registry, Scenario};
