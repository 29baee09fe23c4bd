//! Configuration, orchestration and persistence of experiments.

pub mod config;
pub mod run;

pub use config::ExperimentConfig;
pub use run::{run_experiment, RunManifest, RunOutcome, Slice};
