//! File formats, experiment orchestration and the `jointdet` command line on
//! top of [`jointdet_core`].

pub mod commands;
pub mod config;
pub mod formats;
pub mod plot;

pub use jointdet_core as core;

/// Environment variable holding the log filter, e.g. `JOINTDET_LOG=debug`.
pub const LOG_ENV: &str = "JOINTDET_LOG";
