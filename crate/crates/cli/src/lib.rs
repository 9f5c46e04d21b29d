//! Batch driver: dataset simulation, univariate and bivariate fits, region
//! extraction and chain diagnostics, configured by TOML and reproducible
//! from a seed.

pub mod chain_io;
pub mod config;
pub mod data;
pub mod error;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{CliError, Result};
pub use run::{replay, run, Manifest, RunReport};
