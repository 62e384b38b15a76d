//! Configuration, experiment orchestration and artifact files behind the
//! `rfl-lab` command-line tool.

pub mod artifacts;
pub mod config;
pub mod run;

pub use artifacts::{ErrorReport, RunManifest};
pub use config::{load_config, Experiment, ExperimentConfig, OutputConfig, SobolevConfig, OUT_ENV, SCHEMA_VERSION};
pub use run::{error_json, run_experiment, RunOutcome};
