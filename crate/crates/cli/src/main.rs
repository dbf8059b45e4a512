//! `delcon`: scenario runner for delegated-contracting mechanisms.
//!
//! Exit codes: 0 success, 1 input error, 2 feasibility-gate failure.

mod config;
mod scenario;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use scenario::Failure;

#[derive(Parser)]
#[command(name = "delcon", version, about = "delegated-contracting mechanism scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config's grid resolution.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Constraint tolerance for verification.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Output directory for scenario artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for the randomized parts of the self test; scenario results
    /// never depend on it.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its artifacts.
    Run { config: PathBuf },
    /// Check a mechanism CSV against a utilities CSV for delegated
    /// implementability.
    Verify { mechanism: PathBuf, utilities: PathBuf },
    /// Re-run the acceptance checks at reduced grid sizes.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result: Result<(), Failure> = match &cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| Failure::Input(format!("config '{}': {e}", config.display())));
            text.and_then(|t| Config::parse(&t).map_err(Failure::Input)).and_then(|mut cfg| {
                if let Some(n) = cli.grid {
                    cfg.set("numerics.grid_resolution", n.to_string());
                }
                scenario::run(&cfg, &cli.out)
            })
        }
        Command::Verify { mechanism, utilities } => scenario::verify(
            &mechanism.display().to_string(),
            &utilities.display().to_string(),
            cli.tol,
        ),
        Command::Selftest => {
            let failures = selftest::run(cli.seed);
            if failures == 0 {
                Ok(())
            } else {
                Err(Failure::Gate(format!("{failures} self-test criteria failed")))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
