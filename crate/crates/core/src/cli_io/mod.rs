//! Config files, data formats and command implementations behind the
//! `dcmmd` binary.

pub mod commands;
pub mod config;
pub mod files;

pub use commands::{bench, calibrate, detect, fit, frontier, perf, simulate, Suite};
pub use config::{exit_code, DetectorSpec, ExperimentConfig, Resolved, ScenarioSource, ThresholdSetting};
