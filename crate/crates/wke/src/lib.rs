//! Batch driver for `wke-core`: configuration, field files and the
//! `verify`, `evolve`, `ks` and `equilibrium` runs.

pub mod config;
pub mod error;
pub mod io;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
