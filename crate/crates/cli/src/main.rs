//! `sscoll`: simulations, evaluator comparisons, benchmarks, convergence
//! studies, kernel fitting and kernel diagnostics.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectral_collision::solver::EvaluatorKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "sscoll", version, about = "Anisotropic collision operator toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SSCOLL_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one initial condition and write diagnostics and snapshots.
    Simulate {
        #[command(flatten)]
        io: RunArgs,
        #[arg(long, value_parser = parse_evaluator)]
        evaluator: Option<EvaluatorKind>,
    },
    /// Evaluate the direct and fast operators on one state and compare.
    Compare {
        #[command(flatten)]
        io: RunArgs,
        /// Largest accepted relative L∞ difference.
        #[arg(long, default_value_t = commands::compare::DEFAULT_THRESHOLD)]
        threshold: f64,
    },
    /// Time one operator evaluation per grid size.
    Bench(commands::bench::BenchArgs),
    /// Refine-and-compare study over a mesh list.
    Convergence {
        #[command(flatten)]
        io: RunArgs,
        #[arg(long, value_parser = parse_evaluator)]
        evaluator: Option<EvaluatorKind>,
    },
    /// Fit SS-kernel parameters to a particle ensemble.
    Fit {
        #[command(flatten)]
        io: RunArgs,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the structural kernel conditions and tabulate the channel functions.
    DiagnoseKernel(commands::diagnose::DiagnoseArgs),
}

fn parse_evaluator(s: &str) -> Result<EvaluatorKind, String> {
    s.parse().map_err(|e: spectral_collision::Error| e.to_string())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::validation("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { io, evaluator } => commands::simulate::run(&io.config, &io.out, evaluator),
        Command::Compare { io, threshold } => commands::compare::run(&io.config, &io.out, threshold),
        Command::Bench(a) => commands::bench::run(&a),
        Command::Convergence { io, evaluator } => commands::convergence::run(&io.config, &io.out, evaluator),
        Command::Fit { io, seed } => commands::fit::run(&io.config, &io.out, seed),
        Command::DiagnoseKernel(a) => commands::diagnose::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
