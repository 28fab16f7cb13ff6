use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qplap_cli::{run_file, thread_cap, CliError, Command};

#[derive(Parser)]
#[command(name = "qplap", version, about = "Inverse optimal spectral problems for the weighted q-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Principal eigenpair of the weighted q-Laplacian.
    Eig(Common),
    /// Inverse optimal density for a target eigenvalue.
    Inverse(Common),
    /// Nonnegative solution of the (p,q)-Laplace problem.
    SolvePq(Common),
    /// Property probes listed in the config.
    Probe(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Eig(c) => (Command::Eig, c),
        Cmd::Inverse(c) => (Command::Inverse, c),
        Cmd::SolvePq(c) => (Command::SolvePq, c),
        Cmd::Probe(c) => (Command::Probe, c),
    };
    match execute(cmd, common) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cmd: Command, common: Common) -> Result<i32, CliError> {
    if let Some(n) = thread_cap(std::env::var("QPLAP_THREADS").ok().as_deref())? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure worker pool: {e}")))?;
    }
    let outcome = run_file(cmd, &common.config, common.seed, common.out)?;
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    for f in &outcome.files {
        println!("{}", f.display());
    }
    Ok(outcome.exit_code)
}
