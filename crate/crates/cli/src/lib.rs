//! Scenario files, experiment commands, CSV/JSON persistence and static
//! SVG plots for density-function navigation.

pub mod commands;
pub mod error;
pub mod output;
pub mod plot;
pub mod scenario;
pub mod svg;

pub use commands::{cmd_arm, cmd_compare_nf, cmd_run, cmd_sweep, cmd_verify, CompareArgs, Options, SweepGrid};
pub use error::{CliError, Result};
pub use scenario::Scenario;
