//! File formats, reports, parallel grid execution and the command line for
//! the galgo regression search. The algorithms live in [`galgo_core`].

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod grid;
pub mod report;
pub mod runlog;
pub mod topology;

pub use error::{CliError, CliResult};
pub use galgo_core;
