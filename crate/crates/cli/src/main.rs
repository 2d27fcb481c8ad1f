//! `intham run <config.json>`: trajectories, inversion checks, shell and
//! spectral dumps, the census experiment and field-automaton reports.
//!
//! Exit codes: 0 success, 2 configuration error, 3 model error.

mod config;
mod error;
mod modes;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Mode, RunConfig};
use error::RunError;

#[derive(Parser)]
#[command(name = "intham", version, about = "Integer-valued Hamiltonian dynamics harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a run described by a JSON config file.
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn execute(cli: Cli) -> Result<(), (RunError, Option<PathBuf>)> {
    let Command::Run {
        config,
        mode,
        steps,
        out,
        seed,
    } = cli.command;
    let text = std::fs::read_to_string(&config)
        .map_err(|e| (RunError::Config(format!("{}: {e}", config.display())), None))?;
    let resolved = RunConfig::parse(&text)
        .and_then(|c| c.resolve(mode, steps, seed, out))
        .map_err(|e| (e, None))?;
    modes::run(&resolved).map_err(|e| (e, Some(resolved.out.clone())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, out)) => {
            eprintln!("error: {e}");
            if let Some(dir) = out {
                let report = serde_json::json!({"exit_code": e.exit_code(), "error": e.to_string()});
                let _ = std::fs::write(dir.join("error.json"), format!("{report:#}\n"));
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
