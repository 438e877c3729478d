//! `spsp` experiment runner.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 configuration error,
//! 3 internal error.

// `!(x > y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spsp::Execution;

use commands::{Command, RunError, Setup, Verdict};
use output::{say, Sink};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "SPSP_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "spsp",
    version,
    about = "Certificates, step-size budgets and stability checks for projected iterations"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample the band and check the configured certificate against the oracle.
    Verify(RunArgs),
    /// Run a certificate builder and report feasibility.
    Certify(RunArgs),
    /// Compute a step-size budget and check P1-P3 at its maximum.
    Budget(RunArgs),
    /// Robustness margins plus a perturbed end-to-end verification.
    Robust(RunArgs),
    /// Iterate from a start point and check the one-step descent inequality.
    Simulate(RunArgs),
    /// Empirical practical stability and attractivity over a step-size grid.
    Spas(RunArgs),
    /// Containment level and underestimation step sizes.
    LemmaB(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    config: PathBuf,
    /// Override a config leaf, e.g. `--set sampling.seed=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory [default: output.directory, then $SPSP_OUT_DIR, then ./spsp-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

impl Sub {
    fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Verify(a) => (Command::Verify, a),
            Sub::Certify(a) => (Command::Certify, a),
            Sub::Budget(a) => (Command::Budget, a),
            Sub::Robust(a) => (Command::Robust, a),
            Sub::Simulate(a) => (Command::Simulate, a),
            Sub::Spas(a) => (Command::Spas, a),
            Sub::LemmaB(a) => (Command::LemmaB, a),
        }
    }
}

fn execution(workers: Option<usize>) -> Result<Execution, RunError> {
    match workers {
        None => Ok(Execution::Parallel),
        Some(0) => Err(RunError::Config("--workers: must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| RunError::Internal(format!("starting {n} workers: {e}")))?;
            Ok(Execution::Parallel)
        }
    }
}

fn run(cmd: Command, args: RunArgs) -> Result<Verdict, RunError> {
    let cfg = config::load(&args.config, &args.overrides)?;
    let exec = execution(args.workers)?;
    let dir = args
        .out
        .or_else(|| cfg.output.directory.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("spsp-out"));
    let sink = Sink::new(dir, &cfg.output.formats)?;
    let setup = Setup::new(cfg, exec, sink)?;
    commands::run(cmd, &setup)
}

fn main() -> ExitCode {
    let (cmd, args) = Cli::parse().command.split();
    match run(cmd, args) {
        Ok(Verdict::Pass(line)) => {
            say(&format!("{}: PASS {line}", cmd.name()));
            ExitCode::SUCCESS
        }
        Ok(Verdict::Fail(line)) => {
            say(&format!("{}: FAIL {line}", cmd.name()));
            ExitCode::from(1)
        }
        Err(RunError::Config(msg)) => {
            eprintln!("{}: config error: {msg}", cmd.name());
            ExitCode::from(2)
        }
        Err(RunError::Internal(msg)) => {
            eprintln!("{}: internal error: {msg}", cmd.name());
            ExitCode::from(3)
        }
    }
}
