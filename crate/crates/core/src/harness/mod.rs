//! Experiment engine: config files, seeded trials, error and pancake
//! metrics, CSV reports.

mod config;
mod experiment;
mod metrics;

pub use config::{ExperimentConfig, KEYS};
pub use experiment::{
    format_csv, run_experiment, run_trial, run_trial_detailed, sweep, sweep_configs, trial_data, write_csv,
    TrialArtifacts, TrialResult, TrialSeeds, CSV_COLUMNS,
};
pub use metrics::{measure_error, pancake_density, ErrorEstimate, PancakeDensity};
