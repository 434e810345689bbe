//! Command-line front end: configuration, reproducible output files and the
//! `estimate`, `simulate`, `weights` and `validate` commands.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{run_estimate, run_simulate, run_validate, run_weights};
pub use config::{Overrides, RunConfig};
pub use output::{header_line, strip_header, OutputDir};
