use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod error;
mod golden;
mod output;

use config::{Format, RunConfig};
use error::CliError;
use output::{Metadata, ReportBundle};

/// Security bounds, simulations and estimation reports for quantum
/// money tokens.
#[derive(Debug, Parser)]
#[command(name = "stoken", version)]
struct Cli {
    /// JSON run configuration; omitted sections use the experiment preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step (overrides the config's seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write reports into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Security parameters from the scheme section.
    Bounds,
    /// Honest end-to-end token trials with their transaction times.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Imperfection estimates from count and contrast records.
    Estimate {
        /// Record files; defaults to the config's estimation inputs.
        inputs: Vec<PathBuf>,
    },
    /// Monte-Carlo forging attacks against the unforgeability bound.
    Forge {
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Quantum and comparative advantage of the timing topologies.
    Advantage,
    /// Bounds for a network of 2^M presentation sites.
    Multinode {
        #[arg(long)]
        nodes: Option<u32>,
        #[arg(long)]
        eps_cor_prime: Option<f64>,
        #[arg(long)]
        eps_unf_prime: Option<f64>,
    },
    /// Recomputes every reference value; exits 4 on any mismatch.
    Check,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Bounds => "bounds",
            Command::Simulate { .. } => "simulate",
            Command::Estimate { .. } => "estimate",
            Command::Forge { .. } => "forge",
            Command::Advantage => "advantage",
            Command::Multinode { .. } => "multinode",
            Command::Check => "check",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let format = cli.format.or(cfg.output.format).unwrap_or_default();
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(|d| cfg.base_dir.join(d)));

    let mut mismatches = 0;
    let tables = match &cli.command {
        Command::Bounds => commands::bounds(&cfg, seed)?,
        Command::Simulate { trials } => commands::simulate(&cfg, seed, *trials)?,
        Command::Estimate { inputs } => commands::estimate(&cfg, inputs)?,
        Command::Forge { trials } => commands::forge(&cfg, seed, *trials)?,
        Command::Advantage => commands::advantage_cmd(&cfg)?,
        Command::Multinode {
            nodes,
            eps_cor_prime,
            eps_unf_prime,
        } => commands::multinode(&cfg, seed, *nodes, *eps_cor_prime, *eps_unf_prime)?,
        Command::Check => {
            let (t, n) = commands::check(seed)?;
            mismatches = n;
            t
        }
    };
    let bundle = ReportBundle {
        metadata: Metadata::now(cli.command.name(), seed),
        tables,
    };
    bundle.emit(format, out.as_deref())?;
    if mismatches > 0 {
        return Err(CliError::GoldenMismatch(mismatches));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
