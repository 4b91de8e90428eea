use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use netdefense_cli::{commands, CliError, Context, Overrides};

/// Security investment equilibria on networks under strategic contagious attacks.
#[derive(Parser)]
#[command(name = "netdefense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Also write per-point and per-run detail files.
    #[arg(long, global = true)]
    full: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Write the configured network as an edge list.
    Generate,
    /// Dump protection tensors and their reductions.
    Metrics,
    /// Solve for the Stackelberg equilibrium.
    Equilibrium,
    /// Sweep the cost multiplier and trace the risk/cost frontier.
    Frontier,
    /// Simulate contagion under one defense.
    Simulate,
    /// Simulate no defense, the configured defense and a reshuffle of it.
    Compare,
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Compute(e.to_string()))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let ctx = Context::load(
        path,
        &Overrides {
            seed: cli.seed,
            out: cli.out.clone(),
        },
    )?;
    match cli.command {
        Command::Generate => commands::generate(&ctx),
        Command::Metrics => commands::metrics(&ctx),
        Command::Equilibrium => commands::equilibrium(&ctx),
        Command::Frontier => commands::frontier(&ctx, cli.full),
        Command::Simulate => commands::simulate(&ctx, cli.full),
        Command::Compare => commands::compare(&ctx, cli.full),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
