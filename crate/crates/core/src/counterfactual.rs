// SPDX-License-Identifier: MIT OR Apache-2.0

//! Counterfactual export baskets.
//!
//! A scenario changes the export row of exactly one country and leaves every
//! other row of the reference network untouched. Two modes exist:
//!
//! * fixed L: the country adds the top L products of its recommendation list
//!   to its current basket;
//! * virtual network: in the real `T + Δ` network, the products the country
//!   actually gained since `T` are replaced by the same number of products
//!   from its list built at `T`.
//!
//! Fitness is recomputed on the scenario network with the same solver
//! settings as the reference, and the focal country's fitness and rank
//! changes are reported.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{top_l, Algorithm, DiffusionParams, RecommendationList, Recommender};
use crate::error::{Error, Result};
use crate::evaluation::new_exports;
use crate::fitness::{assign_tiers, solve_network, FitnessResult, SolverConfig, Tier, TierAssignment};
use crate::format::fmt_sig;
use crate::trade_graph::{Bipartite, BipartiteSnapshot};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "fixed_L")]
    FixedL,
    #[serde(rename = "virtual")]
    Virtual,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FixedL => "fixed_L",
            Mode::Virtual => "virtual",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fixed_L" | "fixed_l" | "fixed" => Ok(Mode::FixedL),
            "virtual" | "virtual_network" => Ok(Mode::Virtual),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode `{other}` (expected fixed_L or virtual)"
            ))),
        }
    }
}

/// A reference network with one country's row replaced.
#[derive(Clone, Debug)]
pub struct Scenario<'a> {
    base: &'a BipartiteSnapshot,
    focal: usize,
    row: Vec<usize>,
    added: Vec<usize>,
    removed: Vec<usize>,
    mode: Mode,
}

impl<'a> Scenario<'a> {
    /// The unmodified reference network.
    pub fn base(&self) -> &'a BipartiteSnapshot {
        self.base
    }

    pub fn focal(&self) -> usize {
        self.focal
    }

    pub fn focal_id(&self) -> &str {
        &self.base.countries()[self.focal]
    }

    /// Product indices linked to the focal country that the reference lacks.
    pub fn added(&self) -> &[usize] {
        &self.added
    }

    /// Product indices the reference links to the focal country that the
    /// scenario drops.
    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Materializes the scenario as a standalone snapshot.
    pub fn to_snapshot(&self) -> BipartiteSnapshot {
        let rows = (0..self.country_count()).map(|i| (self.country_id(i).to_owned(), self.row(i).to_vec()));
        BipartiteSnapshot::from_rows(self.base.year(), self.base.products().to_vec(), rows)
            .expect("scenario rows index the base product list")
    }
}

impl Bipartite for Scenario<'_> {
    fn country_count(&self) -> usize {
        self.base.country_count()
    }

    fn product_count(&self) -> usize {
        self.base.product_count()
    }

    fn row(&self, country: usize) -> &[usize] {
        if country == self.focal {
            &self.row
        } else {
            self.base.row(country)
        }
    }

    fn country_id(&self, country: usize) -> &str {
        self.base.country_id(country)
    }

    fn product_id(&self, product: usize) -> &str {
        self.base.product_id(product)
    }
}

/// Adds the first `list_length` products of `recs` to `country`'s basket.
pub fn apply_recommendations<'a>(
    snapshot: &'a BipartiteSnapshot,
    country: &str,
    recs: &RecommendationList,
    list_length: usize,
) -> Result<Scenario<'a>> {
    if recs.snapshot_fingerprint != snapshot.fingerprint() {
        return Err(Error::SnapshotMismatch);
    }
    if recs.country != country {
        return Err(Error::InvalidParameter(format!(
            "recommendation list belongs to `{}`, not `{country}`",
            recs.country
        )));
    }
    if list_length > recs.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot add {list_length} products from a list of {}",
            recs.len()
        )));
    }
    let focal = snapshot.require_country(country)?;
    let added: Vec<usize> = recs.product_indices().take(list_length).collect();
    if let Some(&a) = added.iter().find(|&&a| snapshot.has_link(focal, a)) {
        return Err(Error::InvalidParameter(format!(
            "`{country}` already exports `{}`",
            snapshot.products()[a]
        )));
    }
    let mut row = snapshot.rows()[focal].clone();
    row.extend(&added);
    row.sort_unstable();
    Ok(Scenario {
        base: snapshot,
        focal,
        row,
        added,
        removed: Vec::new(),
        mode: Mode::FixedL,
    })
}

/// Replaces `country`'s real additions between `train` and `test` by the
/// same number of products from `recs` (built on `train`). The returned
/// scenario is based on `test`.
pub fn virtual_network<'a>(
    train: &BipartiteSnapshot,
    test: &'a BipartiteSnapshot,
    country: &str,
    recs: &RecommendationList,
) -> Result<Scenario<'a>> {
    if recs.snapshot_fingerprint != train.fingerprint() {
        return Err(Error::SnapshotMismatch);
    }
    if recs.country != country {
        return Err(Error::InvalidParameter(format!(
            "recommendation list belongs to `{}`, not `{country}`",
            recs.country
        )));
    }
    if train.products() != test.products() {
        return Err(Error::ProductMismatch);
    }
    let gained = new_exports(train, test, country)?;
    let dynamic_length = gained.len();
    if dynamic_length == 0 {
        return Err(Error::NoNewExports(country.to_owned()));
    }
    if recs.len() < dynamic_length {
        return Err(Error::InvalidParameter(format!(
            "`{country}` gained {dynamic_length} products but only {} are recommended",
            recs.len()
        )));
    }
    let focal = test.require_country(country)?;
    let removed: Vec<usize> = gained
        .iter()
        .map(|p| test.product_index(p).expect("gained product is in test"))
        .collect();

    let mut row: Vec<usize> = test.rows()[focal]
        .iter()
        .copied()
        .filter(|a| removed.binary_search(a).is_err())
        .collect();
    let picks: Vec<usize> = recs.product_indices().take(dynamic_length).collect();
    row.extend(&picks);
    row.sort_unstable();
    row.dedup();

    let reference = &test.rows()[focal];
    let added = row
        .iter()
        .copied()
        .filter(|a| reference.binary_search(a).is_err())
        .collect();
    let removed = reference
        .iter()
        .copied()
        .filter(|a| row.binary_search(a).is_err())
        .collect();
    Ok(Scenario {
        base: test,
        focal,
        row,
        added,
        removed,
        mode: Mode::Virtual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub country: String,
    pub fitness_base: f64,
    pub fitness_scenario: f64,
    pub delta_fitness: f64,
    pub rank_base: usize,
    pub rank_scenario: usize,
    /// `rank_base − rank_scenario`; positive means the country moved up.
    pub delta_rank: i64,
}

/// Solves fitness on both the reference and the scenario network and reports
/// the focal country's changes.
pub fn evaluate_scenario(scenario: &Scenario<'_>, config: SolverConfig) -> Result<ScenarioOutcome> {
    let base = solve_network(scenario.base(), scenario.base().year(), config)?;
    if !base.converged {
        return Err(Error::NonConvergence(config.max_iter));
    }
    evaluate_against(&base, scenario, config)
}

/// Like [`evaluate_scenario`] with the reference solved beforehand using the
/// same `config`.
pub fn evaluate_against(
    base: &FitnessResult,
    scenario: &Scenario<'_>,
    config: SolverConfig,
) -> Result<ScenarioOutcome> {
    let focal = scenario.focal();
    if base.countries.len() != scenario.country_count() || base.countries[focal] != scenario.focal_id() {
        return Err(Error::InvalidParameter(
            "reference fitness was computed on a different network".into(),
        ));
    }
    let after = if scenario.added().is_empty() && scenario.removed().is_empty() {
        base.clone()
    } else {
        solve_network(scenario, scenario.base().year(), config)?
    };
    if !after.converged {
        return Err(Error::NonConvergence(config.max_iter));
    }
    let (f0, f1) = (base.fitness[focal], after.fitness[focal]);
    let (r0, r1) = (base.ranks[focal], after.ranks[focal]);
    Ok(ScenarioOutcome {
        country: scenario.focal_id().to_owned(),
        fitness_base: f0,
        fitness_scenario: f1,
        delta_fitness: f1 - f0,
        rank_base: r0,
        rank_scenario: r1,
        delta_rank: r0 as i64 - r1 as i64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub mode: Mode,
    pub algorithm: Algorithm,
    /// Products added to the focal country.
    pub list_length: usize,
    pub tier: Tier,
    #[serde(flatten)]
    pub outcome: ScenarioOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TierAggregate {
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub tier: Tier,
    pub countries: usize,
    pub mean_delta_fitness: f64,
    pub mean_delta_rank: f64,
    /// Countries with a strictly positive fitness change.
    pub improved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Skipped {
    pub algorithm: Algorithm,
    pub country: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterfactualReport {
    pub mode: Mode,
    pub year: i32,
    pub rows: Vec<ReportRow>,
    pub aggregates: Vec<TierAggregate>,
    pub skipped: Vec<Skipped>,
}

impl CounterfactualReport {
    fn assemble(
        mode: Mode,
        year: i32,
        algorithms: &[Algorithm],
        rows: Vec<ReportRow>,
        skipped: Vec<Skipped>,
    ) -> Self {
        let mut aggregates = Vec::new();
        for &algorithm in algorithms {
            for tier in Tier::ALL {
                let members: Vec<&ReportRow> = rows
                    .iter()
                    .filter(|r| r.algorithm == algorithm && r.tier == tier)
                    .collect();
                let n = members.len();
                let mean = |f: &dyn Fn(&ReportRow) -> f64| {
                    if n == 0 {
                        0.0
                    } else {
                        members.iter().map(|r| f(r)).sum::<f64>() / n as f64
                    }
                };
                aggregates.push(TierAggregate {
                    mode,
                    algorithm,
                    tier,
                    countries: n,
                    mean_delta_fitness: mean(&|r| r.outcome.delta_fitness),
                    mean_delta_rank: mean(&|r| r.outcome.delta_rank as f64),
                    improved: members.iter().filter(|r| r.outcome.delta_fitness > 0.0).count(),
                });
            }
        }
        Self {
            mode,
            year,
            rows,
            aggregates,
            skipped,
        }
    }

    pub fn aggregate(&self, algorithm: Algorithm, tier: Tier) -> Option<&TierAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.algorithm == algorithm && a.tier == tier)
    }

    /// Countries whose fitness strictly increased under `algorithm`.
    pub fn improved(&self, algorithm: Algorithm) -> usize {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algorithm && r.outcome.delta_fitness > 0.0)
            .count()
    }

    pub fn write_rows_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "mode,algorithm,L,country,tier,fitness_base,fitness_scenario,delta_fitness,rank_base,rank_scenario,delta_rank"
        )?;
        for r in &self.rows {
            let o = &r.outcome;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.mode,
                r.algorithm,
                r.list_length,
                o.country,
                r.tier,
                fmt_sig(o.fitness_base),
                fmt_sig(o.fitness_scenario),
                fmt_sig(o.delta_fitness),
                o.rank_base,
                o.rank_scenario,
                o.delta_rank
            )?;
        }
        Ok(())
    }

    pub fn write_aggregates_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "mode,algorithm,tier,countries,mean_delta_fitness,mean_delta_rank,improved"
        )?;
        for a in &self.aggregates {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                a.mode,
                a.algorithm,
                a.tier,
                a.countries,
                fmt_sig(a.mean_delta_fitness),
                fmt_sig(a.mean_delta_rank),
                a.improved
            )?;
        }
        Ok(())
    }
}

fn solve_reference(
    snapshot: &BipartiteSnapshot,
    config: SolverConfig,
) -> Result<(FitnessResult, TierAssignment)> {
    let base = solve_network(snapshot, snapshot.year(), config)?;
    if !base.converged {
        return Err(Error::NonConvergence(config.max_iter));
    }
    let tiers = assign_tiers(&base)?;
    Ok((base, tiers))
}

/// Fixed-L experiment: every country of `snapshot`, one at a time, adds its
/// top `list_length` products under each algorithm. `past` is the snapshot at
/// `t − τ`, required by DI and TProbS.
///
/// Countries with fewer than `list_length` products left to add take all of
/// them; the row's `list_length` records how many were added.
pub fn tier_report(
    snapshot: &BipartiteSnapshot,
    past: Option<&BipartiteSnapshot>,
    algorithms: &[Algorithm],
    params: DiffusionParams,
    list_length: usize,
    config: SolverConfig,
) -> Result<CounterfactualReport> {
    let (base, tiers) = solve_reference(snapshot, config)?;
    let recommender = Recommender::new(snapshot, past, params)?;

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &algorithm in algorithms {
        let lists = recommender.recommend_all(algorithm, list_length.max(1))?;
        let outcomes: Vec<(String, Result<ReportRow>)> = lists
            .par_iter()
            .map(|recs| {
                let take = list_length.min(recs.len());
                let row = apply_recommendations(snapshot, &recs.country, recs, take)
                    .and_then(|s| evaluate_against(&base, &s, config))
                    .map(|outcome| ReportRow {
                        mode: Mode::FixedL,
                        algorithm,
                        list_length: take,
                        tier: tiers.tier_of(&recs.country).expect("tiered country"),
                        outcome,
                    });
                (recs.country.clone(), row)
            })
            .collect();
        collect_outcomes(algorithm, outcomes, &mut rows, &mut skipped);
    }
    Ok(CounterfactualReport::assemble(
        Mode::FixedL,
        snapshot.year(),
        algorithms,
        rows,
        skipped,
    ))
}

fn collect_outcomes(
    algorithm: Algorithm,
    outcomes: Vec<(String, Result<ReportRow>)>,
    rows: &mut Vec<ReportRow>,
    skipped: &mut Vec<Skipped>,
) {
    for (country, o) in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("{algorithm}: skipping {country}: {e}");
                skipped.push(Skipped {
                    algorithm,
                    country,
                    reason: e.to_string(),
                });
            }
        }
    }
}

/// Virtual-network experiment: for every country present at both `train`
/// and `test`, its real additions in `test` are replaced by its top-`L_i`
/// recommendations from `train`, with `L_i` the number of real additions.
/// Tiers come from fitness on the real `test` network. Countries without
/// additions are listed in `skipped`.
pub fn virtual_report(
    train: &BipartiteSnapshot,
    past: Option<&BipartiteSnapshot>,
    test: &BipartiteSnapshot,
    algorithms: &[Algorithm],
    params: DiffusionParams,
    config: SolverConfig,
) -> Result<CounterfactualReport> {
    if train.products() != test.products() {
        return Err(Error::ProductMismatch);
    }
    let (base, tiers) = solve_reference(test, config)?;
    let recommender = Recommender::new(train, past, params)?;

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for &algorithm in algorithms {
        let scores = recommender.score_matrix(algorithm)?;
        let outcomes: Vec<(String, Result<ReportRow>)> = train
            .countries()
            .par_iter()
            .enumerate()
            .filter(|(_, c)| test.country_index(c).is_some())
            .map(|(i, country)| {
                let row = new_exports(train, test, country).and_then(|gained| {
                    if gained.is_empty() {
                        return Err(Error::NoNewExports(country.clone()));
                    }
                    let recs = top_l(scores.row(i), train, country, gained.len())?;
                    let scenario = virtual_network(train, test, country, &recs)?;
                    let outcome = evaluate_against(&base, &scenario, config)?;
                    Ok(ReportRow {
                        mode: Mode::Virtual,
                        algorithm,
                        list_length: gained.len(),
                        tier: tiers.tier_of(country).expect("tiered country"),
                        outcome,
                    })
                });
                (country.clone(), row)
            })
            .collect();
        collect_outcomes(algorithm, outcomes, &mut rows, &mut skipped);
    }
    Ok(CounterfactualReport::assemble(
        Mode::Virtual,
        test.year(),
        algorithms,
        rows,
        skipped,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountryAverage {
    pub algorithm: Algorithm,
    pub country: String,
    pub mean_delta_fitness: f64,
    pub mean_delta_rank: f64,
    pub runs: usize,
}

/// Averages each country's deltas over several reports (e.g. one virtual
/// report per training year).
pub fn average_by_country(reports: &[CounterfactualReport]) -> Vec<CountryAverage> {
    let mut acc: BTreeMap<(Algorithm, &str), (f64, f64, usize)> = BTreeMap::new();
    for r in reports.iter().flat_map(|r| &r.rows) {
        let e = acc
            .entry((r.algorithm, r.outcome.country.as_str()))
            .or_insert((0.0, 0.0, 0));
        e.0 += r.outcome.delta_fitness;
        e.1 += r.outcome.delta_rank as f64;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((algorithm, country), (df, dr, n))| CountryAverage {
            algorithm,
            country: country.to_owned(),
            mean_delta_fitness: df / n as f64,
            mean_delta_rank: dr / n as f64,
            runs: n,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthSweepRow {
    pub algorithm: Algorithm,
    pub list_length: usize,
    pub country: String,
    pub fitness_base: f64,
    pub fitness_scenario: f64,
}

/// Focal-country fitness as a function of the number of recommended
/// products added, for the given countries.
pub fn length_sweep(
    snapshot: &BipartiteSnapshot,
    past: Option<&BipartiteSnapshot>,
    algorithms: &[Algorithm],
    params: DiffusionParams,
    lengths: &[usize],
    countries: &[String],
    config: SolverConfig,
) -> Result<Vec<LengthSweepRow>> {
    let (base, _) = solve_reference(snapshot, config)?;
    let recommender = Recommender::new(snapshot, past, params)?;
    let longest = lengths.iter().copied().max().unwrap_or(0).max(1);
    let mut out = Vec::new();
    for &algorithm in algorithms {
        let scores = recommender.score_matrix(algorithm)?;
        for country in countries {
            let i = snapshot.require_country(country)?;
            let recs = top_l(scores.row(i), snapshot, country, longest)?;
            let rows: Vec<Result<LengthSweepRow>> = lengths
                .par_iter()
                .map(|&l| {
                    let take = l.min(recs.len());
                    let s = apply_recommendations(snapshot, country, &recs, take)?;
                    let o = evaluate_against(&base, &s, config)?;
                    Ok(LengthSweepRow {
                        algorithm,
                        list_length: take,
                        country: country.clone(),
                        fitness_base: o.fitness_base,
                        fitness_scenario: o.fitness_scenario,
                    })
                })
                .collect();
            for r in rows {
                out.push(r?);
            }
        }
    }
    Ok(out)
}

/// Deterministically samples up to `count` countries of one tier, returned
/// in id order.
pub fn sample_tier(tiers: &TierAssignment, tier: Tier, count: usize, seed: u64) -> Vec<String> {
    let members: Vec<&str> = tiers.members(tier).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<String> = members
        .choose_multiple(&mut rng, count.min(members.len()))
        .map(|s| s.to_string())
        .collect();
    picked.sort();
    picked
}
