use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rvsm", version, about = "Relaxed variable splitting for one-hidden-layer CNN regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config value, e.g. `--set optimizer.beta=0.01`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory (defaults to the config's `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Cartesian grid of experiments.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check prox, gradient and Monte Carlo oracles.
    Certify {
        #[arg(long)]
        quick: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, set, out } => rvsm::cli::cmd_run(&config, &set, out.as_deref()),
        Command::Sweep { config, grid, out } => rvsm::cli::cmd_sweep(&config, &grid, out.as_deref()),
        Command::Certify { quick } => rvsm::cli::cmd_certify(quick),
    };
    ExitCode::from(code as u8)
}
