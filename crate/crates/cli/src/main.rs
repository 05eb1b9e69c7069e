//! `deadcore` — lattice solvers for the limiting free boundary problem
//! max{−Δ∞u, χ_{u>0} − |∇u|} = 0 and its p-Laplacian family.
//!
//! Exit codes: 0 success, 2 configuration/schema error, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Context;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "deadcore", version, about = "Pay-or-Leave Tug-of-War, p-Laplacian and patched-function solvers for the gradient-constraint free boundary problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config and DEADCORE_OUTPUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the game seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Cap the worker thread count (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Keep measured wall times in the persisted reports (reruns then stop
    /// being byte-identical).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Value-iterate the selected operator to its fixed point.
    SolveDpp,
    /// Minimize the p-Laplacian energy for each configured p.
    SolvePlap,
    /// Run seeded game episodes against the converged value field.
    Simulate,
    /// Run the patched-function uniqueness construction and compare to the DPP.
    Patch,
    /// Measure free-boundary geometry of a solved or supplied field.
    Analyze,
    /// Cross-validate DPP, patch, p-Laplacian, game and oracle on one problem.
    Compare,
    /// Resolve the problem at several ε and tabulate pairwise distances.
    SweepEps,
    /// Solve for each p and tabulate distances to the reference.
    SweepP,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn run(cli: Cli) -> deadcore::Result<()> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| deadcore::Error::Config(format!("workers: {e}")))?;
    }
    let config_path = cli
        .config
        .ok_or_else(|| deadcore::Error::Config("missing required option --config".into()))?;
    let mut config = RunConfig::load(&config_path)?;
    if let Some(seed) = cli.seed {
        if let Some(game) = config.game.as_mut() {
            game.seed = seed;
        }
    }
    let base_dir = config_path
        .parent()
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from("."));
    let out_dir = commands::out_dir_for(&config, cli.out.as_deref());
    let ctx = Context { config, base_dir, out_dir, timings: cli.timings };
    commands::preflight(&ctx)?;
    match cli.command {
        Command::SolveDpp => commands::solve_dpp(&ctx),
        Command::SolvePlap => commands::solve_plap(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Patch => commands::patch(&ctx),
        Command::Analyze => commands::analyze_cmd(&ctx),
        Command::Compare => commands::compare(&ctx),
        Command::SweepEps => commands::sweep_eps(&ctx),
        Command::SweepP => commands::sweep_p(&ctx),
    }
}
