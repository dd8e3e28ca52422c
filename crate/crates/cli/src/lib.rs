//! Command-line harness: configuration, dispatch, reports and self-tests.

pub mod config;
pub mod error;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::{EvalMode, RunConfig, Settings, TaskKind};
pub use error::{CliError, Result};
pub use report::Report;
pub use run::run;
pub use selftest::{run_selftest, Check};
