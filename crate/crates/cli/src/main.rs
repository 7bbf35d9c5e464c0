use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use steklov_cli::{execute, Command, JobConfig, EXIT_CHECK_FAILED, EXIT_OK};

#[derive(Parser)]
#[command(name = "steklov", version, about = "Band structure of the Steklov problem in a periodic channel")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// TOML job configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Limit-problem modes and probe values (limit.csv).
    Limit,
    /// Phase sweeps for every scale (bands.csv, gaps.csv).
    Bands,
    /// First-order band predictions (predict.csv).
    Predict,
    /// Aperture capacity.
    Capacity,
    /// Full pipeline with pass/fail checks.
    Verify,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let command = match cli.command {
        Sub::Limit => Command::Limit,
        Sub::Bands => Command::Bands,
        Sub::Predict => Command::Predict,
        Sub::Capacity => Command::Capacity,
        Sub::Verify => Command::Verify,
    };
    let result = JobConfig::load(cli.config.as_deref()).and_then(|cfg| execute(command, &cfg));
    match result {
        Ok((out, paths)) => {
            print!("{}", out.stdout);
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::from(if out.success { EXIT_OK } else { EXIT_CHECK_FAILED } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
