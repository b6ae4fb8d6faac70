//! Library half of the `dgor` binary: request types, data ingestion,
//! output formatting and the HTTP service.

pub mod api;
pub mod cli;
pub mod error;
pub mod ingest;
pub mod output;
pub mod server;

pub use error::{CliError, Result};
