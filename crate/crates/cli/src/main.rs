// SPDX-License-Identifier: MIT OR Apache-2.0

//! `tradenet` batch frontend.
//!
//! ```text
//! tradenet ingest   --input trade.csv --years 2001:2015
//! tradenet fitness  --year 2008
//! tradenet evaluate --algo probs,heats,di,tprobs,degree --T 2001:2010
//! tradenet simulate --mode fixed_L --year 2010 --L 20
//! ```
//!
//! Exit codes: 0 ok, 2 configuration error, 3 data error, 4 non-convergence.

mod cache;
mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser, Debug)]
#[command(
    name = "tradenet",
    version,
    about = "Trade-network recommendation and fitness analyses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with default values for any flag (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Build yearly RCA snapshots from export records into the cache
    Ingest,
    /// Top-L product recommendations per country
    Recommend,
    /// Fitness, complexity, ranks and tiers
    Fitness,
    /// Precision/recall sweep over training years
    Evaluate,
    /// Counterfactual fitness changes from adopting recommendations
    Simulate,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    NonConvergence(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::NonConvergence(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::NonConvergence(m) => write!(f, "not converged: {m}"),
        }
    }
}

impl From<tradenet::Error> for CliError {
    fn from(e: tradenet::Error) -> Self {
        match e {
            tradenet::Error::NonConvergence(_) => CliError::NonConvergence(e.to_string()),
            e if e.is_data_error() => CliError::Data(e.to_string()),
            e => CliError::Config(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => Overrides::from_file(path)?,
        None => Overrides::default(),
    };
    let cfg = cli.overrides.or(file).resolve()?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Recommend => commands::recommend(&cfg),
        Command::Fitness => commands::fitness(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Simulate => commands::simulate(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tradenet: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
