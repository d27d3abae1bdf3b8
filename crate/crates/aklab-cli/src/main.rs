//! aklab — configuration-driven verification suites, Hermitian Calabi flow,
//! geodesic, Hessian and principal-symbol runs on flat symplectic tori.
//!
//! Exit codes: 0 success, 1 numeric check failure or instability,
//! 2 usage/configuration errors.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "aklab", version, about = "Almost-Kähler laboratory on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid size override (points per axis).
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suites and write a JSON report.
    Verify(CommonArgs),
    /// Run the Hermitian Calabi flow and write the CSV trace.
    Flow(CommonArgs),
    /// Integrate a geodesic and compare against the closed form.
    Geodesic(CommonArgs),
    /// Evaluate the Hessian formula against its finite-difference oracle.
    Hessian(CommonArgs),
    /// Extract the principal symbol and verify weak parabolicity.
    Symbol(CommonArgs),
}

fn load(args: &CommonArgs) -> anyhow::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.grid {
        config.grid.n = n;
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&RunConfig) -> anyhow::Result<i32>) = match &cli.command {
        Command::Verify(a) => (a, commands::cmd_verify),
        Command::Flow(a) => (a, commands::cmd_flow),
        Command::Geodesic(a) => (a, commands::cmd_geodesic),
        Command::Hessian(a) => (a, commands::cmd_hessian),
        Command::Symbol(a) => (a, commands::cmd_symbol),
    };
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
