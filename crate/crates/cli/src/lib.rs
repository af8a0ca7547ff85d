//! Batch runner for the synthesis, verification and simulation experiments.
//!
//! Every subcommand reads one JSON document, writes a CSV table (header row,
//! floats with 17 significant digits) and, when writing to a file, a
//! `<out>.meta.json` sidecar with tolerances, iteration counts and the
//! conventions in force.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{bellman, dro, figure1, simulate, RunOptions};
pub use config::{ExperimentConfig, SimulateOptions, Tolerances};
pub use output::Output;
