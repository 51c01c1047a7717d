use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pgreen_cli::{run, workers_from_env, Command, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "pgreen", version, about = "p-Green functions on warped products: solve, regularize, check")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve for the Green profiles and write profile, level and asymptotics tables.
    Green(Common),
    /// Solve the regularized problems over the ε schedule.
    Regularize(Common),
    /// Check the configured claims and write one report per claim.
    Check(Common),
    /// Everything over the (metric, p, ε, claim) grid, aggregated into sweep.csv.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for level jitter; overrides the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Multiply every checker tolerance.
    #[arg(long, value_name = "X", default_value_t = 1.0)]
    tol_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Green(c) => (Command::Green, c),
        Sub::Regularize(c) => (Command::Regularize, c),
        Sub::Check(c) => (Command::Check, c),
        Sub::Sweep(c) => (Command::Sweep, c),
    };
    let cfg = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let workers = match workers_from_env() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        out: common.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed: common.seed.unwrap_or(cfg.seed),
        tol_scale: common.tol_scale,
        workers,
    };
    match run(command, &cfg, &opts) {
        Ok(summary) => {
            for line in summary.lines() {
                println!("{line}");
            }
            ExitCode::from(summary.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
