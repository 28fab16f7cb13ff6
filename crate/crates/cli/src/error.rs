use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qplap_core::Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    NotConverged(String),
    #[error("probes failed: {}", .0.join(", "))]
    ProbesFailed(Vec<String>),
}

impl CliError {
    /// 1 for configuration and usage problems, 2 for solver non-convergence
    /// and failed probes.
    pub fn exit_code(&self) -> i32 {
        use qplap_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::Usage(_) | CliError::Io { .. } => 1,
            CliError::NotConverged(_) | CliError::ProbesFailed(_) => 2,
            CliError::Core(e) => match e {
                E::Dimension { .. } | E::Parameter(_) | E::DegenerateInput(_) | E::Admissibility(_) => 1,
                _ => 2,
            },
        }
    }
}
