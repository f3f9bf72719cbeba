//! Scenario files, CSV / SVG output and the subcommands behind `cartsim`.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use error::{CliError, CliResult};
pub use scenario::ScenarioFile;
