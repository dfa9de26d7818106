//! Library side of the `steamnet` command: configuration, plotting and the
//! subcommand bodies, kept out of `main` so they can be tested directly.

pub mod config;
pub mod plots;
pub mod run;

pub use config::{Config, ConfigError};
pub use run::{CliError, Overrides};
