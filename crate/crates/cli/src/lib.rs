//! File formats and subcommands behind the `uvt` binary.

pub mod args;
pub mod commands;
pub mod container;
pub mod error;
pub mod fsutil;
pub mod manifest;
pub mod pgm;
pub mod tables;

pub use error::{CliError, Result};

/// Caps the worker pool at `UVT_THREADS` when set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("UVT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::usage(format!(
            "UVT_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure {n} workers: {e}")))
}
