use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use drumhead::config::{load_config, RunConfig};
use drumhead::run::{run_command, Command, RunError, RunOptions};

/// Ising couplings and spin dynamics for planar Penning-trap ion crystals.
#[derive(Parser, Debug)]
#[command(name = "drumhead", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Lattice jitter seed, overrides `crystal.jitter_seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match &cli.config {
        Some(path) => load_config(path).map_err(RunError::from),
        None => Ok(RunConfig::default()),
    };
    let opts = RunOptions {
        out_dir: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cfg.and_then(|cfg| run_command(cli.command, &cfg, &opts)) {
        Ok(outcome) => {
            if !cli.quiet {
                eprintln!("done: {} file(s) written", outcome.files.len());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
