use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod solution;

use error::CliError;

/// Steady flow past a rotating cylinder, solved by Fourier modes.
#[derive(Parser)]
#[command(name = "rotorflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Solve {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Re-check the invariants of a stored solution.
    Verify { solution: PathBuf },
    /// Tabulate the rotation mismatch g(mu) over a range of mu.
    SweepMu {
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// CSV destination; defaults to `sweep_mu.csv` in the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("ROTORFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("ROTORFLOW_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Solve { config, output_dir } => {
            let out = commands::solve(&config, output_dir.as_deref())?;
            println!("wrote {}", out.display());
        }
        Command::Verify { solution } => commands::verify(&solution, &mut std::io::stdout().lock())?,
        Command::SweepMu {
            config,
            from,
            to,
            steps,
            out,
        } => {
            let path = commands::sweep_mu(&config, from, to, steps, out.as_deref())?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rotorflow: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
