//! Staged command-line pipeline around `mshedge-core`: configuration,
//! real-quote ingestion and hash-tagged artifact files.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use pipeline::{run_all, run_pipeline, Stage};
