//! Experiment runner around `pgreen-core`: reads a JSON config, solves, checks
//! and writes CSV tables, JSON reports and a summary.

pub mod config;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use run::{run, Command, RunOptions, Summary};

/// Environment variable that fixes the worker-pool size.
pub const WORKERS_ENV: &str = "PGREEN_WORKERS";

/// Worker count from `PGREEN_WORKERS`, if set.
pub fn workers_from_env() -> Result<Option<usize>, String> {
    match std::env::var(WORKERS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")),
        },
    }
}
