// SPDX-License-Identifier: MIT OR Apache-2.0

//! Fitness–complexity fixed point.
//!
//! Country fitness is the sum of the complexities of its products; product
//! complexity is the harmonic combination of its exporters' fitness, so it is
//! dominated by the weakest exporter. Both vectors are rescaled to unit mean
//! after every iteration, and iteration stops once the country ranking has
//! been unchanged for a configurable number of consecutive iterations.
//!
//! All sums are taken over terms sorted by value, which makes the result
//! independent of how countries and products are labelled.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::fmt_sig;
use crate::trade_graph::{Bipartite, BipartiteSnapshot};

pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_STABILITY_WINDOW: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Consecutive iterations without any change in the country ranking
    /// required to stop.
    pub stability_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            stability_window: DEFAULT_STABILITY_WINDOW,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 || self.stability_window == 0 {
            return Err(Error::InvalidParameter(
                "max_iter and stability_window must both be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitnessResult {
    pub year: i32,
    pub countries: Vec<String>,
    pub fitness: Vec<f64>,
    /// Product indices with at least one exporter; `complexity` is aligned
    /// with this list.
    pub products: Vec<usize>,
    pub product_ids: Vec<String>,
    pub complexity: Vec<f64>,
    /// Country indices, fittest first.
    pub ranking: Vec<usize>,
    /// 1-based rank of each country.
    pub ranks: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Number of countries whose rank moved, per iteration. Tied countries
    /// share a rank here, unlike in `ranks`.
    pub residual_history: Vec<usize>,
}

impl FitnessResult {
    pub fn country_index(&self, id: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == id)
    }

    pub fn fitness_of(&self, id: &str) -> Option<f64> {
        self.country_index(id).map(|i| self.fitness[i])
    }

    pub fn rank_of(&self, id: &str) -> Option<usize> {
        self.country_index(id).map(|i| self.ranks[i])
    }

    /// `year,country,fitness,rank`, fittest first.
    pub fn write_fitness_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "year,country,fitness,rank")?;
        for &i in &self.ranking {
            writeln!(
                out,
                "{},{},{},{}",
                self.year,
                self.countries[i],
                fmt_sig(self.fitness[i]),
                self.ranks[i]
            )?;
        }
        Ok(())
    }

    /// `year,product,complexity` in product id order.
    pub fn write_complexity_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "year,product,complexity")?;
        for (p, q) in self.product_ids.iter().zip(&self.complexity) {
            writeln!(out, "{},{},{}", self.year, p, fmt_sig(*q))?;
        }
        Ok(())
    }
}

/// Single complexity update for one product: `1 / Σ 1/F` over its exporters.
///
/// Returns `None` for a product without exporters.
pub fn complexity_step(exporter_fitness: &[f64]) -> Option<f64> {
    if exporter_fitness.is_empty() {
        return None;
    }
    let mut inv: Vec<f64> = exporter_fitness.iter().map(|f| 1.0 / f).collect();
    Some(1.0 / sorted_sum(&mut inv))
}

fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_unstable_by(f64::total_cmp);
    terms.iter().sum()
}

fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let mut scratch = values.to_vec();
    let mean = sorted_sum(&mut scratch) / values.len() as f64;
    for v in values {
        *v /= mean;
    }
}

fn rank_countries<N: Bipartite + ?Sized>(net: &N, fitness: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&x, &y| match fitness[y].total_cmp(&fitness[x]) {
        Ordering::Equal => net.country_id(x).cmp(net.country_id(y)),
        o => o,
    });
    order
}

/// `1 + #{countries with strictly higher fitness}`; equal values share a
/// rank, so the result does not depend on labels.
fn competition_ranks(fitness: &[f64]) -> Vec<usize> {
    let mut sorted = fitness.to_vec();
    sorted.sort_unstable_by(|x, y| y.total_cmp(x));
    fitness
        .iter()
        .map(|f| 1 + sorted.partition_point(|g| g.total_cmp(f).is_gt()))
        .collect()
}

pub fn solve_fitness(snapshot: &BipartiteSnapshot, config: SolverConfig) -> Result<FitnessResult> {
    solve_network(snapshot, snapshot.year(), config)
}

/// Runs the coupled iteration on any binary network view.
///
/// Non-convergence within `max_iter` is not an error: the result comes back
/// with `converged == false`.
pub fn solve_network<N: Bipartite + ?Sized>(
    net: &N,
    year: i32,
    config: SolverConfig,
) -> Result<FitnessResult> {
    config.validate()?;
    let u = net.country_count();
    if u == 0 {
        return Err(Error::InvalidParameter("network has no countries".into()));
    }
    let columns = net.columns();
    let products: Vec<usize> = (0..columns.len()).filter(|&a| !columns[a].is_empty()).collect();

    // complexity indexed by full product index; products without exporters stay 0
    let mut fitness = vec![1.0; u];
    let mut complexity = vec![0.0; net.product_count()];
    for &a in &products {
        complexity[a] = 1.0;
    }

    let mut standing = competition_ranks(&fitness);
    let mut history = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    let mut scratch = Vec::new();

    while history.len() < config.max_iter {
        let next_fitness: Vec<f64> = (0..u)
            .map(|i| {
                scratch.clear();
                scratch.extend(net.row(i).iter().map(|&a| complexity[a]));
                sorted_sum(&mut scratch)
            })
            .collect();
        let mut next_complexity = vec![0.0; complexity.len()];
        for &a in &products {
            scratch.clear();
            scratch.extend(columns[a].iter().map(|&i| 1.0 / fitness[i]));
            next_complexity[a] = 1.0 / sorted_sum(&mut scratch);
        }

        fitness = next_fitness;
        normalize(&mut fitness);
        let mut retained: Vec<f64> = products.iter().map(|&a| next_complexity[a]).collect();
        normalize(&mut retained);
        for (&a, q) in products.iter().zip(retained) {
            next_complexity[a] = q;
        }
        complexity = next_complexity;

        let next_standing = competition_ranks(&fitness);
        let moved = next_standing
            .iter()
            .zip(&standing)
            .filter(|(x, y)| x != y)
            .count();
        history.push(moved);
        standing = next_standing;
        stable = if moved == 0 { stable + 1 } else { 0 };
        if stable >= config.stability_window {
            converged = true;
            break;
        }
    }

    let ranking = rank_countries(net, &fitness);
    let mut ranks = vec![0; u];
    for (pos, &i) in ranking.iter().enumerate() {
        ranks[i] = pos + 1;
    }
    Ok(FitnessResult {
        year,
        countries: (0..u).map(|i| net.country_id(i).to_owned()).collect(),
        fitness,
        product_ids: products.iter().map(|&a| net.product_id(a).to_owned()).collect(),
        complexity: products.iter().map(|&a| complexity[a]).collect(),
        products,
        ranking,
        ranks,
        iterations: history.len(),
        converged,
        residual_history: history,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Top,
    Middle,
    Low,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Top, Tier::Middle, Tier::Low];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Top => "top",
            Tier::Middle => "middle",
            Tier::Low => "low",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TierAssignment {
    pub countries: Vec<String>,
    /// Tier of each country, aligned with `countries`.
    pub tiers: Vec<Tier>,
}

impl TierAssignment {
    pub fn tier_of(&self, id: &str) -> Option<Tier> {
        self.countries.iter().position(|c| c == id).map(|i| self.tiers[i])
    }

    pub fn members(&self, tier: Tier) -> impl Iterator<Item = &str> + '_ {
        self.countries
            .iter()
            .zip(&self.tiers)
            .filter(move |(_, &t)| t == tier)
            .map(|(c, _)| c.as_str())
    }

    pub fn sizes(&self) -> [usize; 3] {
        Tier::ALL.map(|t| self.tiers.iter().filter(|&&x| x == t).count())
    }
}

/// Splits countries into three fitness tiers of equal size. When the count
/// is not divisible by three the extra countries go to the low tier first,
/// then to the middle tier.
pub fn assign_tiers(result: &FitnessResult) -> Result<TierAssignment> {
    let n = result.countries.len();
    if n < 3 {
        return Err(Error::TooFewCountries(n));
    }
    let (base, extra) = (n / 3, n % 3);
    let top = base;
    let middle = base + usize::from(extra >= 2);
    let mut tiers = vec![Tier::Low; n];
    for (pos, &i) in result.ranking.iter().enumerate() {
        tiers[i] = if pos < top {
            Tier::Top
        } else if pos < top + middle {
            Tier::Middle
        } else {
            Tier::Low
        };
    }
    Ok(TierAssignment {
        countries: result.countries.clone(),
        tiers,
    })
}
