//! Command-line front end: CSV ingestion, fitting, grid selection,
//! simulation, metrics and timing, with JSON/CSV outputs.

pub mod bundle;
pub mod commands;
pub mod error;
pub mod ingest;
pub mod proxy;

pub use commands::{run, Cli};
pub use error::CliError;
