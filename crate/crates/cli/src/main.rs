#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Outcome};
use config::RunConfig;
use error::CliError;

/// Total-stability certification for discrete-time nonlinear systems.
#[derive(Debug, Parser)]
#[command(name = "totalstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// directory for reports and CSV data
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// overrides the configured seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// overrides the interior sample count
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// overrides the safety factor applied to budgets
    #[arg(long, global = true)]
    safety: Option<f64>,
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Linearization, Stein solve and certified ε
    Analyze,
    /// Perturbation budgets δ1..δ4
    Bounds,
    /// Perturbed equilibrium and its sampled certificates
    Equilibrium,
    /// Output regulation under integral action
    Regulate,
    /// Radial counterexample profile, decrease table and sublevel components
    Counterexample,
    /// Sampled model and Jacobian distance between f and f̂
    Distance,
}

fn load(cli: &Cli) -> Result<Context, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let (mut cfg, config_text) = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.samples {
        cfg.sampling.interior = n;
    }
    if let Some(s) = cli.safety {
        cfg.safety = s;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out).map_err(|source| CliError::Io {
        path: cli.out.display().to_string(),
        source,
    })?;
    Ok(Context {
        cfg,
        config_text,
        out: cli.out.clone(),
    })
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let ctx = load(cli)?;
    match cli.command {
        Command::Analyze => commands::analyze(&ctx),
        Command::Bounds => commands::bounds(&ctx),
        Command::Equilibrium => commands::equilibrium(&ctx),
        Command::Regulate => commands::regulate(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
        Command::Distance => commands::distance(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new().filter_level(level).init();
    if let Some(n) = std::env::var("TOTALSTAB_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.json);
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
