//! Scenario files, validation and plain-text outputs for the `encircle` tool.

pub mod commands;
pub mod curves;
pub mod error;
pub mod scenario;

pub use error::{CliError, ValidationCode};
pub use scenario::{load_scenario, load_scenario_with, LoadedScenario, Overrides, Scenario};
