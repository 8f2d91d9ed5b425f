use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gppa::cli;

/// Generalized proximal point solver: run configs, benchmark suites and
/// re-verify stored traces.
///
/// Log verbosity follows the GPPA_LOG environment variable
/// (error, warn, info, debug, trace).
#[derive(Debug, Parser)]
#[command(name = "gppa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one config; writes the trace CSV and a JSON summary.
    Solve { config: PathBuf },
    /// Run every config of a suite and print an aggregate table.
    Bench { suite: PathBuf },
    /// Re-check the descent inequality on a stored trace.
    Verify {
        trace: PathBuf,
        #[arg(long = "t")]
        t: f64,
        #[arg(long = "L")]
        lipschitz: f64,
        /// Use the t - L/2 constant (convex g1).
        #[arg(long)]
        convex_g1: bool,
        /// Slack; defaults to 1e-10 * (1 + |f(x0)|).
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GPPA_LOG", "warn")).init();
    let args = Cli::parse();
    let code = match args.command {
        Command::Solve { config } => cli::cmd_solve(&config),
        Command::Bench { suite } => cli::cmd_bench(&suite),
        Command::Verify {
            trace,
            t,
            lipschitz,
            convex_g1,
            tol,
        } => cli::cmd_verify(&trace, t, lipschitz, convex_g1, tol),
    };
    ExitCode::from(code as u8)
}
