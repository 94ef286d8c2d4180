//! Command-line driver: experiments over slip-field energies, line-tension
//! tables, convex envelopes, and log-scaling sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pnfield::config::{validate, ExperimentKind, RawConfig};
use pnfield::error::Error;
use pnfield::experiments::run;

#[derive(Parser)]
#[command(name = "pnfield", version, about = "Planar slip-field energy experiments")]
struct Cli {
    /// Configuration file (key = value sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed recorded in the manifest and used by seeded experiments.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build the line-tension table over slip vectors and directions.
    PsiTable,
    /// Evaluate the convex density and export its optimal decomposition.
    Envelope,
    /// Evaluate the energy of a stored grid field.
    Energy,
    /// Gradient-descent minimization of a stored grid field.
    Minimize,
    /// Epsilon sweep of the mollified-jump construction (per-log regime).
    SweepLinetension,
    /// Epsilon sweep of the replicated-shift recovery (per-log^2 regime).
    SweepGamma,
    /// Report configuration violations without running.
    Validate,
}

fn experiment_kind(cmd: Command) -> Option<ExperimentKind> {
    match cmd {
        Command::PsiTable => Some(ExperimentKind::PsiTable),
        Command::Envelope => Some(ExperimentKind::Envelope),
        Command::Energy => Some(ExperimentKind::Energy),
        Command::Minimize => Some(ExperimentKind::Minimize),
        Command::SweepLinetension => Some(ExperimentKind::SweepLineTension),
        Command::SweepGamma => Some(ExperimentKind::SweepGamma),
        Command::Validate => None,
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::BadConfig(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
        {
            eprintln!("pnfield: cannot size the worker pool: {e}");
            return ExitCode::from(3);
        }
    }

    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("pnfield: --config PATH is required");
        return ExitCode::from(2);
    };
    let cfg = match RawConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("pnfield: {e}");
            return ExitCode::from(2);
        }
    };

    match cli.command {
        Command::Validate => {
            let diags = validate(&cfg);
            if diags.is_empty() {
                println!("configuration ok");
                ExitCode::SUCCESS
            } else {
                for d in &diags {
                    println!("diagnostic: {d}");
                }
                ExitCode::from(2)
            }
        }
        cmd => {
            let kind = experiment_kind(cmd).expect("validate handled above");
            match run(&cfg, kind, &cli.out, cli.seed) {
                Ok(outcome) => {
                    for p in &outcome.artifacts {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("pnfield: {e}");
                    ExitCode::from(exit_code_for(&e))
                }
            }
        }
    }
}
