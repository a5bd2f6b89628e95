//! Experiment runner around the `ifprony` estimators: synthesises signals
//! from a config, runs the Prony and ridge estimators over one window width
//! or a sweep, scores them against the analytic IF and writes CSV tables,
//! SVG plots and a manifest.

pub mod config;
pub mod error;
pub mod experiment;
pub mod figures;
pub mod output;
pub mod plot;

pub use config::{Estimator, ExperimentConfig, ModeConfig, PronyOverrides, SigmaSpec};
pub use error::CliError;
pub use experiment::{run, EstimatorRun, RunResult};
