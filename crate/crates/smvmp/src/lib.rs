//! File formats, seeded experiment runs and reports for `smvmp-core`.

pub mod error;
pub mod experiment;
pub mod io;
pub mod report;

pub use error::{CliError, Result};
pub use experiment::{generate, run_dynamic_all, run_static, DynamicRun, RunConfig, StaticRun};
