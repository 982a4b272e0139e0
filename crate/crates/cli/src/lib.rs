//! Library side of the `monopriv` command-line tool: configuration,
//! orchestration, report rendering and canned demos.

pub mod config;
pub mod demo;
pub mod render;
pub mod runner;

pub use config::{Format, RunConfig};
pub use runner::{run, RunReport, EXIT_CONFIG, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS};
