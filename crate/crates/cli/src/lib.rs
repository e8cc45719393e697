//! Command line and HTTP front end of the strider planning suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;

pub use config::{Suite, SuiteConfig};
pub use error::CliError;
