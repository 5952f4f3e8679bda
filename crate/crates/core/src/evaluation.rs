// SPDX-License-Identifier: MIT OR Apache-2.0

//! Time-split precision and recall of recommendation lists.
//!
//! Lists are built from the training year `T` (and `T − τ` where the scorer
//! needs it). They are scored against the products each country starts to
//! export by `T + Δ`. Products a country stops exporting are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::{Algorithm, DiffusionParams, RecommendationList, Recommender};
use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::trade_graph::BipartiteSnapshot;

pub const DEFAULT_HORIZON: i32 = 5;

/// Products linked to `country` in `test` but not in `train`.
pub fn new_exports(
    train: &BipartiteSnapshot,
    test: &BipartiteSnapshot,
    country: &str,
) -> Result<BTreeSet<String>> {
    let i = train.require_country(country)?;
    let j = test.require_country(country)?;
    let before: BTreeSet<&str> = train.rows()[i]
        .iter()
        .map(|&a| train.products()[a].as_str())
        .collect();
    Ok(test.rows()[j]
        .iter()
        .map(|&a| test.products()[a].as_str())
        .filter(|p| !before.contains(p))
        .map(str::to_owned)
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountryEvaluation {
    pub country: String,
    /// Recommended products that were newly exported.
    pub hits: usize,
    /// Newly exported products.
    pub new_exports: usize,
    pub precision: f64,
    /// `None` when the country gained no products.
    pub recall: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationRun {
    pub train_year: i32,
    pub test_year: i32,
    /// Set when the run built its own lists; `params.epsilon` is the value
    /// DI settled on.
    pub algorithm: Option<Algorithm>,
    pub params: Option<DiffusionParams>,
    pub list_length: usize,
    pub countries: Vec<CountryEvaluation>,
    /// Countries with a list at `T` that are missing at `T + Δ`.
    pub excluded: Vec<String>,
    /// Mean precision over evaluated countries.
    pub precision: f64,
    /// Mean recall over countries that gained at least one product.
    pub recall: f64,
    /// Mean recall counting countries without new products as zero.
    pub recall_including_empty: f64,
    /// Countries without new products, left out of `recall`.
    pub no_gain: usize,
}

impl EvaluationRun {
    /// True when no evaluated country gained a product.
    pub fn is_degenerate(&self) -> bool {
        self.countries.iter().all(|c| c.new_exports == 0)
    }

    pub fn total_hits(&self) -> usize {
        self.countries.iter().map(|c| c.hits).sum()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Scores `recommendations` (built from `train`) against the products each
/// country newly exports in `test`.
pub fn precision_recall(
    train: &BipartiteSnapshot,
    test: &BipartiteSnapshot,
    recommendations: &[RecommendationList],
    list_length: usize,
) -> Result<EvaluationRun> {
    if list_length == 0 {
        return Err(Error::InvalidParameter(
            "recommendation list length must be at least 1".into(),
        ));
    }
    if train.products() != test.products() {
        return Err(Error::ProductMismatch);
    }
    let mut countries = Vec::new();
    let mut excluded = Vec::new();
    for recs in recommendations {
        if recs.snapshot_fingerprint != train.fingerprint() {
            return Err(Error::SnapshotMismatch);
        }
        if test.country_index(&recs.country).is_none() {
            log::info!(
                "{} absent at {}, excluded from evaluation",
                recs.country,
                test.year()
            );
            excluded.push(recs.country.clone());
            continue;
        }
        let gained = new_exports(train, test, &recs.country)?;
        let hits = recs
            .ranked
            .iter()
            .take(list_length)
            .filter(|r| gained.contains(&r.product))
            .count();
        countries.push(CountryEvaluation {
            country: recs.country.clone(),
            hits,
            new_exports: gained.len(),
            precision: hits as f64 / list_length as f64,
            recall: (!gained.is_empty()).then(|| hits as f64 / gained.len() as f64),
        });
    }

    let no_gain = countries.iter().filter(|c| c.recall.is_none()).count();
    if no_gain == countries.len() && !countries.is_empty() {
        log::warn!(
            "no country gained products between {} and {}",
            train.year(),
            test.year()
        );
    }
    Ok(EvaluationRun {
        train_year: train.year(),
        test_year: test.year(),
        algorithm: None,
        params: None,
        list_length,
        precision: mean(countries.iter().map(|c| c.precision)),
        recall: mean(countries.iter().filter_map(|c| c.recall)),
        recall_including_empty: mean(countries.iter().map(|c| c.recall.unwrap_or(0.0))),
        no_gain,
        countries,
        excluded,
    })
}

/// Builds lists for `algorithm` from `train` (and `past`, the snapshot at
/// `T − τ`) and evaluates them against `test`. `test` is never handed to the
/// recommender.
pub fn evaluate_algorithm(
    train: &BipartiteSnapshot,
    past: Option<&BipartiteSnapshot>,
    test: &BipartiteSnapshot,
    algorithm: Algorithm,
    params: DiffusionParams,
    list_length: usize,
) -> Result<EvaluationRun> {
    if test.year() <= train.year() || past.is_some_and(|p| p.year() >= train.year()) {
        return Err(Error::InvalidParameter(
            "evaluation needs past < train < test years".into(),
        ));
    }
    let recommender = Recommender::new(train, past, params)?;
    let lists = recommender.recommend_all(algorithm, list_length)?;
    let mut run = precision_recall(train, test, &lists, list_length)?;
    run.algorithm = Some(algorithm);
    run.params = Some(recommender.params());
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub params: DiffusionParams,
    pub train_year: i32,
    pub precision: f64,
    pub recall: f64,
    pub recall_including_empty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub algorithm: Algorithm,
    pub params: DiffusionParams,
    pub years: usize,
    pub precision: f64,
    pub recall: f64,
    pub recall_including_empty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSkip {
    pub train_year: i32,
    pub algorithm: Algorithm,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub horizon: i32,
    pub list_length: usize,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
    pub skipped: Vec<SweepSkip>,
}

/// Evaluates every algorithm for every training year in `train_years` and
/// averages per algorithm. Pairs whose snapshots are missing are reported in
/// `skipped` and the sweep continues.
pub fn sweep(
    snapshots: &BTreeMap<i32, BipartiteSnapshot>,
    train_years: RangeInclusive<i32>,
    algorithms: &[Algorithm],
    params: DiffusionParams,
    list_length: usize,
    horizon: i32,
) -> Result<SweepReport> {
    params.validate()?;
    if horizon < 1 {
        return Err(Error::InvalidParameter(format!(
            "horizon must be at least 1 year, got {horizon}"
        )));
    }
    let jobs: Vec<(i32, Algorithm)> = train_years
        .flat_map(|t| algorithms.iter().map(move |&a| (t, a)))
        .collect();

    let outcomes: Vec<std::result::Result<SweepRow, SweepSkip>> = jobs
        .par_iter()
        .map(|&(t, algorithm)| {
            let skip = |reason: String| SweepSkip {
                train_year: t,
                algorithm,
                reason,
            };
            let train = snapshots
                .get(&t)
                .ok_or_else(|| skip(Error::MissingSnapshot(t).to_string()))?;
            let test = snapshots
                .get(&(t + horizon))
                .ok_or_else(|| skip(Error::MissingSnapshot(t + horizon).to_string()))?;
            let past = if algorithm.needs_past() {
                let y = t - params.tau;
                Some(
                    snapshots
                        .get(&y)
                        .ok_or_else(|| skip(Error::MissingSnapshot(y).to_string()))?,
                )
            } else {
                None
            };
            let run = evaluate_algorithm(train, past, test, algorithm, params, list_length)
                .map_err(|e| skip(e.to_string()))?;
            Ok(SweepRow {
                algorithm,
                params: run.params.unwrap_or(params),
                train_year: t,
                precision: run.precision,
                recall: run.recall,
                recall_including_empty: run.recall_including_empty,
            })
        })
        .collect();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(s) => {
                log::warn!("skipping T={} {}: {}", s.train_year, s.algorithm, s.reason);
                skipped.push(s);
            }
        }
    }

    let summary = algorithms
        .iter()
        .filter_map(|&algorithm| {
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.algorithm == algorithm).collect();
            (!mine.is_empty()).then(|| SweepSummary {
                algorithm,
                params,
                years: mine.len(),
                precision: mean(mine.iter().map(|r| r.precision)),
                recall: mean(mine.iter().map(|r| r.recall)),
                recall_including_empty: mean(mine.iter().map(|r| r.recall_including_empty)),
            })
        })
        .collect();

    Ok(SweepReport {
        horizon,
        list_length,
        rows,
        summary,
        skipped,
    })
}

impl SweepReport {
    /// Writes `algorithm,theta,tau,T,precision,recall,recall_including_empty`
    /// rows followed by one summary row per algorithm with `T = mean`.
    /// `theta` is blank for scorers that ignore it, `tau` likewise.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "algorithm,theta,tau,T,precision,recall,recall_including_empty"
        )?;
        let params_cols = |a: Algorithm, p: &DiffusionParams| {
            let theta = if a == Algorithm::TProbS {
                fmt_sig(p.theta)
            } else {
                String::new()
            };
            let tau = if a.needs_past() {
                p.tau.to_string()
            } else {
                String::new()
            };
            (theta, tau)
        };
        for r in &self.rows {
            let (theta, tau) = params_cols(r.algorithm, &r.params);
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm,
                theta,
                tau,
                r.train_year,
                fmt_sig(r.precision),
                fmt_sig(r.recall),
                fmt_sig(r.recall_including_empty)
            )?;
        }
        for s in &self.summary {
            let (theta, tau) = params_cols(s.algorithm, &s.params);
            writeln!(
                out,
                "{},{},{},mean,{},{},{}",
                s.algorithm,
                theta,
                tau,
                fmt_sig(s.precision),
                fmt_sig(s.recall),
                fmt_sig(s.recall_including_empty)
            )?;
        }
        Ok(())
    }

    /// Algorithm with the highest mean recall; ties go to the earlier entry.
    pub fn best_by_recall(&self) -> Option<Algorithm> {
        self.summary
            .iter()
            .fold(None::<&SweepSummary>, |best, s| match best {
                Some(b) if b.recall >= s.recall => Some(b),
                _ => Some(s),
            })
            .map(|s| s.algorithm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::top_l;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn snap(year: i32, links: &[(&str, &str)]) -> BipartiteSnapshot {
        BipartiteSnapshot::from_links(year, ids(&["p", "q", "r", "s"]), links.iter().copied()).unwrap()
    }

    fn names(set: BTreeSet<String>) -> Vec<String> {
        set.into_iter().collect()
    }

    #[test]
    fn new_exports_is_additions_only() {
        let train = snap(2001, &[("A", "p"), ("A", "q")]);
        let test = snap(2006, &[("A", "p"), ("A", "q"), ("A", "r")]);
        assert_eq!(names(new_exports(&train, &test, "A").unwrap()), ["r"]);
        assert!(new_exports(&train, &train, "A").unwrap().is_empty());

        let train = snap(2001, &[("A", "p")]);
        let test = snap(2006, &[("A", "q")]);
        assert_eq!(names(new_exports(&train, &test, "A").unwrap()), ["q"]);
        assert!(matches!(
            new_exports(&train, &test, "B"),
            Err(Error::UnknownCountry(_))
        ));
    }

    #[test]
    fn precision_and_recall_by_hand() {
        let train = snap(2001, &[("A", "p"), ("B", "q")]);
        let test = snap(
            2006,
            &[
                ("A", "p"),
                ("A", "q"),
                ("A", "r"),
                ("A", "s"),
                ("B", "q"),
                ("B", "p"),
            ],
        );
        // A gains q, r, s; B gains p
        let a = top_l(&[0.0, 0.9, 0.1, 0.0], &train, "A", 2).unwrap(); // q, r → 2 hits
        let b = top_l(&[0.0, 0.0, 0.5, 0.4], &train, "B", 2).unwrap(); // r, s → 0 hits
        let run = precision_recall(&train, &test, &[a, b], 2).unwrap();
        assert_eq!(run.countries[0].hits, 2);
        assert_eq!(run.countries[0].precision, 1.0);
        assert_eq!(run.countries[0].recall, Some(2.0 / 3.0));
        assert_eq!(run.countries[1].recall, Some(0.0));
        assert_eq!(run.precision, 0.5);
        assert_eq!(run.recall, 1.0 / 3.0);
    }

    #[test]
    fn recall_convention_without_gains() {
        let train = snap(2001, &[("A", "p"), ("B", "q")]);
        let test = snap(2006, &[("A", "p"), ("A", "q"), ("B", "q")]);
        let a = top_l(&[0.0, 1.0, 0.0, 0.0], &train, "A", 1).unwrap();
        let b = top_l(&[1.0, 0.0, 0.0, 0.0], &train, "B", 1).unwrap();
        let run = precision_recall(&train, &test, &[a, b], 1).unwrap();
        assert_eq!(run.recall, 1.0);
        assert_eq!(run.recall_including_empty, 0.5);
        assert_eq!(run.no_gain, 1);
    }

    #[test]
    fn identical_snapshots_give_degenerate_run() {
        let s = snap(2001, &[("A", "p"), ("B", "q")]);
        let later = snap(2006, &[("A", "p"), ("B", "q")]);
        let rec = Recommender::new(&s, None, DiffusionParams::default()).unwrap();
        let lists = rec.recommend_all(Algorithm::ProbS, 2).unwrap();
        let run = precision_recall(&s, &later, &lists, 2).unwrap();
        assert!(run.is_degenerate());
        assert_eq!((run.precision, run.recall), (0.0, 0.0));
    }

    #[test]
    fn churned_countries_are_excluded() {
        let train = snap(2001, &[("A", "p"), ("B", "q")]);
        let test = snap(2006, &[("A", "p"), ("A", "q")]);
        let rec = Recommender::new(&train, None, DiffusionParams::default()).unwrap();
        let lists = rec.recommend_all(Algorithm::Degree, 1).unwrap();
        let run = precision_recall(&train, &test, &lists, 1).unwrap();
        assert_eq!(run.excluded, vec!["B".to_string()]);
        assert_eq!(run.countries.len(), 1);
    }

    #[test]
    fn lists_from_other_snapshot_are_rejected() {
        let train = snap(2001, &[("A", "p")]);
        let other = snap(2002, &[("A", "p")]);
        let test = snap(2006, &[("A", "p"), ("A", "q")]);
        let list = top_l(&[0.0, 1.0, 0.0, 0.0], &other, "A", 1).unwrap();
        assert!(matches!(
            precision_recall(&train, &test, &[list], 1),
            Err(Error::SnapshotMismatch)
        ));
    }

    #[test]
    fn sweep_averages_and_reports_missing_years() {
        let mut snaps = BTreeMap::new();
        snaps.insert(2001, snap(2001, &[("A", "p"), ("B", "q")]));
        snaps.insert(2002, snap(2002, &[("A", "p"), ("B", "q"), ("B", "p")]));
        snaps.insert(2006, snap(2006, &[("A", "p"), ("A", "q"), ("B", "q")]));
        snaps.insert(
            2007,
            snap(2007, &[("A", "p"), ("B", "q"), ("B", "p"), ("B", "r")]),
        );
        let report = sweep(
            &snaps,
            2001..=2002,
            &[Algorithm::Degree, Algorithm::DegreeIncrease],
            DiffusionParams::default(),
            1,
            5,
        )
        .unwrap();
        // DI at 2001 needs 2000
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.skipped[0].train_year, 2001);
        assert_eq!(report.rows.len(), 3);
        let degree = report
            .summary
            .iter()
            .find(|s| s.algorithm == Algorithm::Degree)
            .unwrap();
        let per_year: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| r.algorithm == Algorithm::Degree)
            .map(|r| r.precision)
            .collect();
        assert_eq!(degree.years, 2);
        assert_eq!(degree.precision, (per_year[0] + per_year[1]) / 2.0);

        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("algorithm,theta,tau,T,precision,recall,recall_including_empty\n"));
        assert!(text.contains("degree,,,mean,"));
    }
}
