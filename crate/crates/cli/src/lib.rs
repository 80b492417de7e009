//! Configuration files, experiment drivers and report files for the
//! `bmlmc` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, Result};
