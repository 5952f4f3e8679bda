// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: command-line flags layered over an optional TOML file,
//! layered over built-in defaults.

use std::fmt;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};

use tradenet::diffusion::{DEFAULT_EPSILON, DEFAULT_LIST_LENGTH, DEFAULT_TAU, DEFAULT_THETA};
use tradenet::evaluation::DEFAULT_HORIZON;
use tradenet::fitness::{DEFAULT_MAX_ITER, DEFAULT_STABILITY_WINDOW};
use tradenet::{Algorithm, DiffusionParams, Mode, SolverConfig};

use crate::CliError;

/// Inclusive year range written `A:B` (or a single year `A`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearRange {
    pub from: i32,
    pub to: i32,
}

impl YearRange {
    pub fn range(self) -> RangeInclusive<i32> {
        self.from..=self.to
    }
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| {
            x.trim()
                .parse::<i32>()
                .map_err(|_| format!("invalid year `{x}` in range `{s}`"))
        };
        let (from, to) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let y = parse(s)?;
                (y, y)
            }
        };
        if from > to {
            return Err(format!("empty year range `{s}`"));
        }
        Ok(YearRange { from, to })
    }
}

impl TryFrom<String> for YearRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<YearRange> for String {
    fn from(r: YearRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.from, self.to)
    }
}

/// Every tunable, all optional. Flags and the config file both fill this;
/// flags win.
#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Export records, `year,country,product,value`
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Years to ingest, `A:B`
    #[arg(long, global = true)]
    pub years: Option<YearRange>,
    /// Training years for evaluate / virtual simulate, `A:B`
    #[arg(long = "T", global = true)]
    #[serde(rename = "T")]
    pub train_years: Option<YearRange>,
    /// Snapshot year for recommend, fitness and fixed-L simulate
    #[arg(long, global = true)]
    pub year: Option<i32>,
    /// Years between training and test snapshot
    #[arg(long, global = true)]
    pub horizon: Option<i32>,
    /// Comma-separated algorithms: probs, heats, di, tprobs, degree
    #[arg(long = "algo", visible_alias = "algos", value_delimiter = ',', global = true)]
    #[serde(alias = "algos")]
    pub algo: Option<Vec<Algorithm>>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub tau: Option<i32>,
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Recommendation list length
    #[arg(long = "L", global = true)]
    #[serde(rename = "L")]
    pub list_length: Option<usize>,
    /// fixed_L or virtual
    #[arg(long, global = true)]
    pub mode: Option<Mode>,
    /// RCA threshold for a link
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Iterations with an unchanged ranking needed to stop the solver
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Seed for sampling countries in the list-length sweep
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// List lengths for the fixed-L sweep, e.g. 0,5,10,20
    #[arg(long, value_delimiter = ',', global = true)]
    pub lengths: Option<Vec<usize>>,
    /// Countries sampled from the middle tier for the list-length sweep
    #[arg(long, global = true)]
    pub sample: Option<usize>,
    /// Explicit countries for the list-length sweep (replaces sampling)
    #[arg(long, value_delimiter = ',', global = true)]
    pub countries: Option<Vec<String>>,
    /// Snapshot cache directory
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Field-wise `self` if set, else `other`.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            input: self.input.or(other.input),
            years: self.years.or(other.years),
            train_years: self.train_years.or(other.train_years),
            year: self.year.or(other.year),
            horizon: self.horizon.or(other.horizon),
            algo: self.algo.or(other.algo),
            theta: self.theta.or(other.theta),
            tau: self.tau.or(other.tau),
            epsilon: self.epsilon.or(other.epsilon),
            list_length: self.list_length.or(other.list_length),
            mode: self.mode.or(other.mode),
            threshold: self.threshold.or(other.threshold),
            max_iter: self.max_iter.or(other.max_iter),
            window: self.window.or(other.window),
            seed: self.seed.or(other.seed),
            lengths: self.lengths.or(other.lengths),
            sample: self.sample.or(other.sample),
            countries: self.countries.or(other.countries),
            cache: self.cache.or(other.cache),
            out: self.out.or(other.out),
            threads: self.threads.or(other.threads),
        }
    }

    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let mut algorithms = self.algo.unwrap_or_else(|| Algorithm::ALL.to_vec());
        let mut seen = std::collections::BTreeSet::new();
        algorithms.retain(|a| seen.insert(*a));
        if algorithms.is_empty() {
            return Err(CliError::Config("no algorithms selected".into()));
        }
        let config = RunConfig {
            input: self.input,
            years: self.years,
            train_years: self.train_years,
            year: self.year,
            horizon: self.horizon.unwrap_or(DEFAULT_HORIZON),
            algorithms,
            params: DiffusionParams {
                theta: self.theta.unwrap_or(DEFAULT_THETA),
                tau: self.tau.unwrap_or(DEFAULT_TAU),
                epsilon: self.epsilon.unwrap_or(DEFAULT_EPSILON),
            },
            list_length: self.list_length.unwrap_or(DEFAULT_LIST_LENGTH),
            mode: self.mode.unwrap_or(Mode::FixedL),
            threshold: self.threshold.unwrap_or(1.0),
            solver: SolverConfig {
                max_iter: self.max_iter.unwrap_or(DEFAULT_MAX_ITER),
                stability_window: self.window.unwrap_or(DEFAULT_STABILITY_WINDOW),
            },
            seed: self.seed.unwrap_or(0),
            lengths: self.lengths,
            sample: self.sample.unwrap_or(30),
            countries: self.countries,
            cache: self.cache.unwrap_or_else(|| PathBuf::from("cache")),
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            threads: self.threads,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Fully resolved configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub years: Option<YearRange>,
    pub train_years: Option<YearRange>,
    pub year: Option<i32>,
    pub horizon: i32,
    pub algorithms: Vec<Algorithm>,
    pub params: DiffusionParams,
    pub list_length: usize,
    pub mode: Mode,
    pub threshold: f64,
    pub solver: SolverConfig,
    pub seed: u64,
    pub lengths: Option<Vec<usize>>,
    pub sample: usize,
    pub countries: Option<Vec<String>>,
    pub cache: PathBuf,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl RunConfig {
    fn validate(&self) -> Result<(), CliError> {
        self.params.validate()?;
        self.solver.validate()?;
        if self.horizon < 1 {
            return Err(CliError::Config(format!(
                "horizon must be at least 1, got {}",
                self.horizon
            )));
        }
        if self.list_length == 0 {
            return Err(CliError::Config("L must be at least 1".into()));
        }
        if !self.threshold.is_finite() || self.threshold <= 0.0 {
            return Err(CliError::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input
            .as_deref()
            .ok_or_else(|| CliError::Config("--input is required".into()))
    }

    pub fn require_year(&self) -> Result<i32, CliError> {
        self.year
            .ok_or_else(|| CliError::Config("--year is required".into()))
    }
}
