//! Batch front end: prediction-file ingestion, run configuration,
//! scenario presets and report emission.
//!
//! Exit codes: 1 usage or config error, 2 data error, 3 infeasible metric,
//! 4 unwritable output.

pub mod app;
pub mod config;
pub mod emit;
pub mod error;
pub mod ingest;
pub mod run;

pub use app::main_with_args;
pub use config::{ResolvedConfig, RunConfig};
pub use error::{CliError, ErrorKind};
