//! Experiment orchestration for grokbench: configuration, presets, parallel
//! multi-seed runs, artifact management and reporting.

pub mod config;
pub mod error;
pub mod experiment;
pub mod fsio;
pub mod manifest;
pub mod presets;
pub mod report;

pub use config::{load, Axis, ExperimentConfig, GridPoint};
pub use error::{HarnessError, Result};
pub use experiment::{execute, run_experiment, sweep, Options};
pub use manifest::Manifest;
