//! File formats, experiment configuration and the sweep harness around
//! `rfkpca-core`.

pub mod config;
pub mod harness;
pub mod io;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig};
pub use harness::{
    diagnose, prepare, run_experiment, write_csv, HarnessError, HeldOut, RunRecord, RunSummary,
};
