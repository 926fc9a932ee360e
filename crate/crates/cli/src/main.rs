//! `insider`: runs a named experiment from a JSON config and writes a CSV
//! table plus a JSON summary.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 invalid config or
//! arguments, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use insider_core::Error;

mod commands;
mod config;
mod report;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Compare,
    VerifyDuality,
    VerifyDecomposition,
    Scan,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::VerifyDuality => "verify-duality",
            Command::VerifyDecomposition => "verify-decomposition",
            Command::Scan => "scan",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "insider",
    version,
    about = "Insider portfolio Monte Carlo experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Log utility of one strategy.
    Simulate(RunArgs),
    /// Paired log utilities of two strategies (default: merton vs insider).
    Compare(RunArgs),
    /// Both sides of the forward-integral duality for one integrand.
    VerifyDuality(RunArgs),
    /// Brownian statistics of B minus the information drift.
    VerifyDecomposition(RunArgs),
    /// Perturbation scan around a strategy.
    Scan(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's "output".
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replications; overrides the config.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::NonPositiveWealth { .. }
            | Error::NonPositiveDensity(_)
            | Error::DegenerateConditioning(..)
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        CliCommand::Simulate(a) => (Command::Simulate, a),
        CliCommand::Compare(a) => (Command::Compare, a),
        CliCommand::VerifyDuality(a) => (Command::VerifyDuality, a),
        CliCommand::VerifyDecomposition(a) => (Command::VerifyDecomposition, a),
        CliCommand::Scan(a) => (Command::Scan, a),
    };

    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
        {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    let overrides = config::Overrides {
        n_reps: args.reps,
        master_seed: args.seed,
    };
    let exp = match config::load(&args.config, command, overrides) {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let rows = match commands::run(command, &exp) {
        Ok(rows) => rows,
        Err(e) if is_numerical(&e) => {
            eprintln!("numerical failure: {e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let dir = args
        .out
        .or_else(|| exp.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    match report::write(&dir, command.name(), &exp.resolved, &rows, timestamp) {
        Ok((csv, json)) => {
            print!("{}", String::from_utf8_lossy(&report::to_csv(&rows)));
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        Err(e) => {
            eprintln!("error: cannot write results to {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    if report::all_pass(&rows) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
