//! Command-line front end for qplap: configuration parsing, the coefficient
//! expression grammar, the subcommands and their output writers.

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod output;
pub mod probes;

use std::path::{Path, PathBuf};

pub use commands::{run, Command, Outcome};
pub use config::{resolve, Resolved, RunConfig};
pub use error::CliError;

/// Reads and validates the config at `path`, then runs `cmd`.
pub fn run_file(cmd: Command, path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Outcome, CliError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
    let resolved = resolve(&src, seed, out)?;
    run(cmd, &resolved)
}

/// Worker cap from `QPLAP_THREADS`; `None` when unset.
pub fn thread_cap(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("QPLAP_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}
