//! Driver for convergence studies and consolidation runs: configuration,
//! execution and CSV, JSON and VTK output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{Resolved, RunConfig};
pub use error::CliError;
