//! Configuration, orchestration and result files for the `rost` command.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, parse_config, ConfigError, Experiment, RunConfig, SourceKind, Tolerances};
pub use run::{run_experiment, RunManifest, RunOutcome, Status};
