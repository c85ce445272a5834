//! Reproducible parameter sweeps: configuration, evaluation and CSV output.

mod config;
mod runner;
mod table;

pub use config::{grid, parse_config, parse_config_str, AxisVariable, CustomPoint, Experiment, SweepPlan};
pub use runner::{columns, run_sweep, run_sweep_with_jobs};
pub use table::{format_general, Table, Value, SIGNIFICANT_DIGITS};
