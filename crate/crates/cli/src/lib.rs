//! Simulate, track, evaluate and plot tensegrity pose-tracking runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use commands::{
    evaluate, plot, simulate, track, EvaluateArgs, PlotArgs, SimulateArgs, TrackArgs,
};
pub use error::{CliError, CliResult};
