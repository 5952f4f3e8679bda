// SPDX-License-Identifier: MIT OR Apache-2.0

//! Product recommendation on the country–product network.
//!
//! Five scorers are provided: mass diffusion (ProbS), heat conduction (HeatS),
//! degree increase (DI), time-aware mass diffusion (TProbS) and plain product
//! degree. Every final score of a product the country already exports is
//! exactly zero.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trade_graph::BipartiteSnapshot;

pub const DEFAULT_LIST_LENGTH: usize = 20;
pub const DEFAULT_THETA: f64 = 0.2;
pub const DEFAULT_TAU: i32 = 1;
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Upper bound on how many times ε is divided by 10 while searching for a
/// value that preserves the Δk ranking.
const MAX_EPSILON_SHRINKS: u32 = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    ProbS,
    HeatS,
    #[serde(rename = "di")]
    DegreeIncrease,
    TProbS,
    Degree,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ProbS,
        Algorithm::HeatS,
        Algorithm::DegreeIncrease,
        Algorithm::TProbS,
        Algorithm::Degree,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::ProbS => "probs",
            Algorithm::HeatS => "heats",
            Algorithm::DegreeIncrease => "di",
            Algorithm::TProbS => "tprobs",
            Algorithm::Degree => "degree",
        }
    }

    /// Whether the scorer reads the snapshot at `t - τ`.
    pub fn needs_past(self) -> bool {
        matches!(self, Algorithm::DegreeIncrease | Algorithm::TProbS)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown algorithm `{s}` (expected probs, heats, di, tprobs or degree)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    /// TProbS exponent on the relative degree growth.
    pub theta: f64,
    /// Time window in years for DI and TProbS.
    pub tau: i32,
    /// DI tie-break weight on the current degree.
    pub epsilon: f64,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            theta: DEFAULT_THETA,
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl DiffusionParams {
    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta must be finite, got {}",
                self.theta
            )));
        }
        if self.tau < 1 {
            return Err(Error::InvalidParameter(format!(
                "tau must be at least 1 year, got {}",
                self.tau
            )));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// `S_{αβ} = Σ_j a_{jα} a_{jβ} / k_j`. Accumulated pairwise per country so
/// that `S` is bitwise symmetric.
fn shared_paths(snapshot: &BipartiteSnapshot) -> Array2<f64> {
    let n = snapshot.products().len();
    let mut s = Array2::<f64>::zeros((n, n));
    for (row, &k) in snapshot.rows().iter().zip(snapshot.country_degrees()) {
        let share = 1.0 / k as f64;
        for &alpha in row {
            for &beta in row {
                s[[alpha, beta]] += share;
            }
        }
    }
    s
}

/// Column-normalised mass-diffusion matrix: `W_{αβ} = S_{αβ} / k_β`.
pub fn probs_matrix(snapshot: &BipartiteSnapshot) -> Array2<f64> {
    let degrees = snapshot.product_degrees();
    let mut w = shared_paths(snapshot);
    for ((_, beta), v) in w.indexed_iter_mut() {
        if degrees[beta] > 0 {
            *v /= degrees[beta] as f64;
        }
    }
    w
}

/// Row-normalised heat-conduction matrix: `W'_{αβ} = S_{αβ} / k_α`, which is
/// the transpose of [`probs_matrix`].
pub fn heats_matrix(snapshot: &BipartiteSnapshot) -> Array2<f64> {
    let degrees = snapshot.product_degrees();
    let mut w = shared_paths(snapshot);
    for ((alpha, _), v) in w.indexed_iter_mut() {
        if degrees[alpha] > 0 {
            *v /= degrees[alpha] as f64;
        }
    }
    w
}

/// `matrix · f` with `f` the 0/1 indicator of `row`.
pub fn spread(matrix: &Array2<f64>, row: &[usize]) -> Vec<f64> {
    matrix
        .rows()
        .into_iter()
        .map(|r| row.iter().map(|&beta| r[beta]).sum())
        .collect()
}

/// Zeroes the scores of products the country already exports.
pub fn mask_exported(snapshot: &BipartiteSnapshot, country: usize, scores: &mut [f64]) {
    for &a in &snapshot.rows()[country] {
        scores[a] = 0.0;
    }
}

pub fn probs_raw_scores(snapshot: &BipartiteSnapshot, country: &str) -> Result<Vec<f64>> {
    let i = snapshot.require_country(country)?;
    Ok(spread(&probs_matrix(snapshot), &snapshot.rows()[i]))
}

pub fn probs_scores(snapshot: &BipartiteSnapshot, country: &str) -> Result<Vec<f64>> {
    let i = snapshot.require_country(country)?;
    let mut s = spread(&probs_matrix(snapshot), &snapshot.rows()[i]);
    mask_exported(snapshot, i, &mut s);
    Ok(s)
}

pub fn heats_raw_scores(snapshot: &BipartiteSnapshot, country: &str) -> Result<Vec<f64>> {
    let i = snapshot.require_country(country)?;
    Ok(spread(&heats_matrix(snapshot), &snapshot.rows()[i]))
}

pub fn heats_scores(snapshot: &BipartiteSnapshot, country: &str) -> Result<Vec<f64>> {
    let i = snapshot.require_country(country)?;
    let mut h = spread(&heats_matrix(snapshot), &snapshot.rows()[i]);
    mask_exported(snapshot, i, &mut h);
    Ok(h)
}

/// Product degree `k_α(t)`; unmasked.
pub fn degree_scores(snapshot: &BipartiteSnapshot) -> Vec<f64> {
    snapshot.product_degrees().iter().map(|&k| k as f64).collect()
}

/// Degree-increase scores `Δk'_α = Δk_α + ε k_α(t)` together with the ε that
/// was actually used.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeIncrease {
    pub scores: Vec<f64>,
    pub epsilon: f64,
}

/// Computes DI scores between `current` (time t) and `past` (time t − τ).
///
/// ε starts at `epsilon` and is divided by 10 until ranking by `Δk'` agrees
/// with ranking by `(Δk, k(t))`.
pub fn degree_increase_scores(
    current: &BipartiteSnapshot,
    past: &BipartiteSnapshot,
    epsilon: f64,
) -> Result<DegreeIncrease> {
    if current.products() != past.products() {
        return Err(Error::ProductMismatch);
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    let now = current.product_degrees();
    let delta: Vec<i64> = now
        .iter()
        .zip(past.product_degrees())
        .map(|(&k, &k0)| k as i64 - k0 as i64)
        .collect();

    let mut reference: Vec<usize> = (0..now.len()).collect();
    reference.sort_by(|&x, &y| delta[y].cmp(&delta[x]).then(now[y].cmp(&now[x])).then(x.cmp(&y)));

    let mut eps = epsilon;
    for _ in 0..=MAX_EPSILON_SHRINKS {
        let scores: Vec<f64> = delta
            .iter()
            .zip(now)
            .map(|(&d, &k)| d as f64 + eps * k as f64)
            .collect();
        if rank_by_score(&scores) == reference {
            return Ok(DegreeIncrease { scores, epsilon: eps });
        }
        log::debug!("epsilon {eps} reorders the degree-increase ranking; shrinking");
        eps /= 10.0;
    }
    Err(Error::InvalidParameter(format!(
        "no epsilon below {epsilon} preserves the degree-increase ranking"
    )))
}

/// Indices ordered by score descending, index ascending on ties.
pub fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]).then(x.cmp(&y)));
    order
}

/// TProbS multiplier `(Δk'_α / k_α(t))^θ`.
///
/// Products with `k_α(t) = 0` get 0. With `θ = 0` the multiplier is 1. A
/// non-positive growth ratio (a shrinking product) gets 0 for `θ ≠ 0`.
pub fn tprobs_multiplier(degree_increase: f64, degree: usize, theta: f64) -> f64 {
    if degree == 0 {
        return 0.0;
    }
    if theta == 0.0 {
        return 1.0;
    }
    let ratio = degree_increase / degree as f64;
    if ratio <= 0.0 {
        0.0
    } else {
        ratio.powf(theta)
    }
}

pub fn tprobs_scores(
    current: &BipartiteSnapshot,
    past: &BipartiteSnapshot,
    country: &str,
    theta: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "theta must be finite, got {theta}"
        )));
    }
    let di = degree_increase_scores(current, past, epsilon)?;
    let s = probs_scores(current, country)?;
    Ok(apply_growth(&s, &di.scores, current.product_degrees(), theta))
}

fn apply_growth(probs: &[f64], increase: &[f64], degrees: &[usize], theta: f64) -> Vec<f64> {
    probs
        .iter()
        .zip(increase)
        .zip(degrees)
        .map(|((&s, &dk), &k)| s * tprobs_multiplier(dk, k, theta))
        .collect()
}

/// Per-country scores of one algorithm on one snapshot.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    pub algorithm: Algorithm,
    pub year: i32,
    pub params: DiffusionParams,
    /// Countries × products, already masked.
    pub scores: Array2<f64>,
    pub snapshot_fingerprint: u64,
}

impl ScoreMatrix {
    pub fn row(&self, country: usize) -> &[f64] {
        self.scores
            .row(country)
            .to_slice()
            .expect("score matrix is standard layout")
    }
}

/// Computes scores for every country of `current`, sharing the diffusion
/// matrices across countries. `past` is the snapshot at `t − τ`, needed by
/// DI and TProbS only.
pub struct Recommender<'a> {
    current: &'a BipartiteSnapshot,
    past: Option<&'a BipartiteSnapshot>,
    params: DiffusionParams,
    probs: OnceLock<Array2<f64>>,
    heats: OnceLock<Array2<f64>>,
    increase: OnceLock<DegreeIncrease>,
}

impl<'a> Recommender<'a> {
    pub fn new(
        current: &'a BipartiteSnapshot,
        past: Option<&'a BipartiteSnapshot>,
        params: DiffusionParams,
    ) -> Result<Self> {
        params.validate()?;
        if let Some(p) = past {
            if p.products() != current.products() {
                return Err(Error::ProductMismatch);
            }
        }
        Ok(Self {
            current,
            past,
            params,
            probs: OnceLock::new(),
            heats: OnceLock::new(),
            increase: OnceLock::new(),
        })
    }

    pub fn snapshot(&self) -> &BipartiteSnapshot {
        self.current
    }

    /// Parameters in effect, with ε replaced by the value DI settled on once
    /// it has been computed.
    pub fn params(&self) -> DiffusionParams {
        let mut p = self.params;
        if let Some(di) = self.increase.get() {
            p.epsilon = di.epsilon;
        }
        p
    }

    fn probs(&self) -> &Array2<f64> {
        self.probs.get_or_init(|| probs_matrix(self.current))
    }

    fn heats(&self) -> &Array2<f64> {
        self.heats.get_or_init(|| heats_matrix(self.current))
    }

    fn increase(&self) -> Result<&DegreeIncrease> {
        if let Some(di) = self.increase.get() {
            return Ok(di);
        }
        let past = self
            .past
            .ok_or(Error::MissingSnapshot(self.current.year() - self.params.tau))?;
        let di = degree_increase_scores(self.current, past, self.params.epsilon)?;
        Ok(self.increase.get_or_init(|| di))
    }

    /// Masked scores of one country by index.
    pub fn country_scores(&self, algorithm: Algorithm, country: usize) -> Result<Vec<f64>> {
        let row = &self.current.rows()[country];
        let mut scores = match algorithm {
            Algorithm::ProbS => spread(self.probs(), row),
            Algorithm::HeatS => spread(self.heats(), row),
            Algorithm::Degree => degree_scores(self.current),
            // shrinking products carry negative Δk'; score matrices stay non-negative
            Algorithm::DegreeIncrease => self.increase()?.scores.iter().map(|&x| x.max(0.0)).collect(),
            Algorithm::TProbS => {
                let di = self.increase()?;
                apply_growth(
                    &spread(self.probs(), row),
                    &di.scores,
                    self.current.product_degrees(),
                    self.params.theta,
                )
            }
        };
        mask_exported(self.current, country, &mut scores);
        Ok(scores)
    }

    pub fn score_matrix(&self, algorithm: Algorithm) -> Result<ScoreMatrix> {
        // resolve shared state before fanning out
        match algorithm {
            Algorithm::ProbS => {
                self.probs();
            }
            Algorithm::HeatS => {
                self.heats();
            }
            Algorithm::DegreeIncrease => {
                self.increase()?;
            }
            Algorithm::TProbS => {
                self.probs();
                self.increase()?;
            }
            Algorithm::Degree => {}
        }
        let (u, n) = (self.current.countries().len(), self.current.products().len());
        let rows: Vec<Vec<f64>> = (0..u)
            .into_par_iter()
            .map(|i| self.country_scores(algorithm, i))
            .collect::<Result<_>>()?;
        let scores = Array2::from_shape_vec((u, n), rows.concat()).expect("rows have product-count length");
        Ok(ScoreMatrix {
            algorithm,
            year: self.current.year(),
            params: self.params(),
            scores,
            snapshot_fingerprint: self.current.fingerprint(),
        })
    }

    /// Top-`list_length` recommendations for every country.
    pub fn recommend_all(&self, algorithm: Algorithm, list_length: usize) -> Result<Vec<RecommendationList>> {
        let matrix = self.score_matrix(algorithm)?;
        self.current
            .countries()
            .iter()
            .enumerate()
            .map(|(i, c)| top_l(matrix.row(i), self.current, c, list_length))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedProduct {
    pub product: String,
    #[serde(skip)]
    pub index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub country: String,
    pub ranked: Vec<RankedProduct>,
    /// Some entries carry a zero score because fewer than L products scored
    /// positive.
    pub padded: bool,
    /// Fewer than L products were available to recommend.
    pub truncated: bool,
    pub snapshot_fingerprint: u64,
}

impl RecommendationList {
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn product_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.ranked.iter().map(|r| r.index)
    }
}

/// Picks the `list_length` best products the country does not export yet,
/// ordered by score descending then product id ascending.
pub fn top_l(
    scores: &[f64],
    snapshot: &BipartiteSnapshot,
    country: &str,
    list_length: usize,
) -> Result<RecommendationList> {
    if list_length == 0 {
        return Err(Error::InvalidParameter(
            "recommendation list length must be at least 1".into(),
        ));
    }
    if scores.len() != snapshot.products().len() {
        return Err(Error::InvalidParameter(format!(
            "{} scores for {} products",
            scores.len(),
            snapshot.products().len()
        )));
    }
    let i = snapshot.require_country(country)?;
    // product indices follow lexicographic id order
    let candidates: Vec<usize> = rank_by_score(scores)
        .into_iter()
        .filter(|&a| !snapshot.has_link(i, a))
        .collect();
    let truncated = candidates.len() < list_length;
    let ranked: Vec<RankedProduct> = candidates
        .into_iter()
        .take(list_length)
        .map(|a| RankedProduct {
            product: snapshot.products()[a].clone(),
            index: a,
            score: scores[a],
        })
        .collect();
    Ok(RecommendationList {
        country: country.to_owned(),
        padded: ranked.iter().any(|r| r.score <= 0.0),
        ranked,
        truncated,
        snapshot_fingerprint: snapshot.fingerprint(),
    })
}

#[derive(Serialize)]
struct RecommendationRecord<'a> {
    country: &'a str,
    algorithm: Algorithm,
    year: i32,
    params: &'a DiffusionParams,
    ranked: Vec<(&'a str, f64)>,
    padded: bool,
    truncated: bool,
}

/// Writes one JSON object per country:
/// `{country, algorithm, year, params, ranked: [[product, score], ...], padded, truncated}`.
/// Scores are rounded to 12 significant digits.
pub fn write_recommendations_jsonl<W: std::io::Write>(
    mut out: W,
    algorithm: Algorithm,
    year: i32,
    params: &DiffusionParams,
    lists: &[RecommendationList],
) -> std::io::Result<()> {
    for list in lists {
        let record = RecommendationRecord {
            country: &list.country,
            algorithm,
            year,
            params,
            ranked: list
                .ranked
                .iter()
                .map(|r| (r.product.as_str(), crate::format::round_sig(r.score)))
                .collect(),
            padded: list.padded,
            truncated: list.truncated,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
