//! Command-line front end for the reqprio pipelines: review-driven
//! prioritization, "requires" mining and release planning.

pub mod commands;
pub mod config;
pub mod http;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use reqprio::{Error, ErrorClass, Result};
use sha2::{Digest, Sha256};

use crate::config::{MineMode, RunConfig};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Parser)]
#[command(name = "reqprio", version, about = "Requirements prioritization and release planning experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(short, long, global = true, default_value = "reqprio.toml")]
    pub config: PathBuf,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(short, long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Overrides `workers`.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load and validate the configured inputs and summarize the instances.
    Ingest,
    /// Fit topic models per instance and report the requirement clusters.
    Topics,
    /// Score and rank requirements, then evaluate every method.
    Prioritize,
    /// Recompute metrics and statistics from saved priority tables.
    Evaluate {
        /// Directory of per-instance priority CSVs.
        #[arg(long)]
        priorities: Option<PathBuf>,
    },
    /// Ask a chat model (or recorded fixtures) for "requires" pairs.
    Mine {
        #[arg(long, value_parser = ["fixture", "live"])]
        mode: Option<String>,
    },
    /// Compute D-values and their variants from a pair set.
    Dvalue,
    /// Run the bi- and tri-objective searches and tabulate reference-front shares.
    Nrp {
        /// Overrides `nrp.runs`.
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Summarize the outputs of earlier commands as Markdown.
    Report,
}

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Configuration => 1,
        ErrorClass::Data => 2,
        ErrorClass::ExternalService => 3,
    }
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.global.output_dir {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = cli.global.workers {
        cfg.workers = w;
    }
    match &cli.command {
        Command::Mine { mode: Some(m) } => {
            cfg.mine.mode = if m == "live" { MineMode::Live } else { MineMode::Fixture };
        }
        Command::Nrp { runs: Some(0) } => return Err(Error::Config("--runs must be positive".into())),
        Command::Nrp { runs: Some(r) } => cfg.nrp.runs = *r,
        _ => {}
    }
    Ok(())
}

/// Loads the config, applies flag overrides and runs the chosen command.
pub fn run(cli: &Cli) -> Result<()> {
    let loaded = RunConfig::load(&cli.global.config)?;
    let mut cfg = loaded.config;
    apply_overrides(&mut cfg, cli)?;
    let mut ctx = commands::Context::new(cfg, loaded.source_sha256);
    let work = |ctx: &mut commands::Context| match &cli.command {
        Command::Ingest => commands::ingest(ctx),
        Command::Topics => commands::topics(ctx),
        Command::Prioritize => commands::prioritize(ctx),
        Command::Evaluate { priorities } => commands::evaluate(ctx, priorities.as_deref()),
        Command::Mine { .. } => commands::mine_cmd(ctx).map(drop),
        Command::Dvalue => commands::dvalue_cmd(ctx),
        Command::Nrp { .. } => commands::nrp_cmd(ctx).map(drop),
        Command::Report => commands::report(ctx),
    };
    if ctx.config.workers == 0 {
        return work(&mut ctx);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| work(&mut ctx))
}
