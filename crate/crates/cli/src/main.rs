mod commands;
mod settings;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oneshot_td::Error;

use settings::Flags;

/// Distributed TD(0)/TD(λ) with one-shot averaging.
#[derive(Debug, Parser)]
#[command(name = "oneshot-td", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact diagnostics: θ*, V*, ω, ω_I, κ, lemma slacks, thresholds, mixing profile
    Solve(Flags),
    /// Runs one fleet per replication and writes per-agent and averaged curves
    Run(Flags),
    /// Measures MSE(N)·N / MSE(1) over replications
    Speedup(Flags),
    /// Exact Markov noise against its geometric envelope
    Noise(Flags),
    /// Checks (t+1)·MSE(t) for the decaying schedules
    Envelope {
        #[command(flatten)]
        flags: Flags,
        /// Allowed relative excess over the fitted constant
        #[arg(long, value_name = "F", default_value_t = 0.15)]
        tolerance: f64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } => 3,
        Error::Io { .. } | Error::Csv(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(f) => commands::solve(f),
        Command::Run(f) => commands::run(f),
        Command::Speedup(f) => commands::speedup(f),
        Command::Noise(f) => commands::noise(f),
        Command::Envelope { flags, tolerance } => commands::envelope(flags, *tolerance),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
