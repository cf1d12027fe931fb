//! Command-line pipeline around `setaside-core`: configuration, CSV input and
//! output, report rendering and the artifact manifest.

pub mod artifacts;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod pipeline;
pub mod reports;

pub use error::CliError;
