//! Configuration, experiment harnesses and result persistence behind the
//! `bopp` binary.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod par;
pub mod verify;

pub use config::RunConfig;
pub use error::{CliError, Result};
