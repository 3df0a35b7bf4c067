//! File formats, configuration and the parallel benchmark harness around
//! [`semifactual_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use config::{Overrides, RunConfig, ThetaSetting};
pub use error::{CliError, Result};
