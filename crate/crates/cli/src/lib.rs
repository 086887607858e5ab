//! Scenario harness: reads an experiment config, runs one sweep and writes
//! CSV/JSON artifacts.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, Outcome};
pub use config::ExperimentConfig;
pub use error::HarnessError;
