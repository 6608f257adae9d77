//! Experiment harness: toy-regression data generation, multi-seed sweeps with
//! paired comparison arms, CSV aggregation, SVG plots, and the CLI entry
//! point behind the `lipgd` binary.

pub mod cli;
pub mod config;
pub mod data;
pub mod expr;
pub mod plot;
pub mod sweep;

pub use cli::cli_main;
pub use config::{ExperimentConfig, SweepAxis, SweepSpec};
pub use data::{generate_dataset, NoiseModel, TargetFunction};
pub use sweep::run_sweep;
