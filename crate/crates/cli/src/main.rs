use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use aggtherm::config::KeyValueConfig;

mod commands;
mod settings;

use commands::{RunContext, Outcome};

/// Aggregate multi-zone building data into a single-zone model and jointly
/// identify its parameters and the unmeasured aggregate heat load.
#[derive(Parser)]
#[command(name = "aggtherm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Random seed for scenario generation and multi-start.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-zone data set with its ground truth.
    Simulate,
    /// Average a zone file into aggregate signals.
    Aggregate { input: PathBuf },
    /// Estimate aggregate parameters and the aggregate heat load.
    Identify {
        /// Zone file or aggregate table.
        input: PathBuf,
        /// Parameter file whose `Estimate` column is the prior.
        #[arg(long)]
        prior: Option<PathBuf>,
        /// Parameter file whose `True Value` column is reported alongside.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Simulate the aggregate model forward with a given load trace.
    Predict {
        /// Zone file or aggregate table.
        input: PathBuf,
        /// Parameter file; the `Estimate` column is used.
        #[arg(long)]
        params: PathBuf,
        /// Table holding the load trace.
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Cross-zone variance traces and the asynchronicity index.
    VarianceReport { input: PathBuf },
}

fn run(cli: Cli) -> Result<Outcome> {
    let mut cfg = match &cli.config {
        Some(p) => KeyValueConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
        None => KeyValueConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    let seed = cfg.get("seed", 0u64)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let ctx = RunContext {
        cfg,
        out: cli.out,
        seed,
    };
    match &cli.command {
        Command::Simulate => commands::simulate(&ctx),
        Command::Aggregate { input } => commands::aggregate(&ctx, input),
        Command::Identify { input, prior, truth } => {
            commands::identify(&ctx, input, prior.as_deref(), truth.as_deref())
        }
        Command::Predict { input, params, load } => commands::predict(&ctx, input, params, load.as_deref()),
        Command::VarianceReport { input } => commands::variance(&ctx, input),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: the solver did not converge; outputs are from the last iterate");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
