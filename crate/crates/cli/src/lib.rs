//! Command-line surface of the harness: subcommand implementations, the CSV
//! tables they emit, and SVG improvement plots.

pub mod commands;
pub mod error;
pub mod svg;
pub mod tables;

pub use error::CliError;
