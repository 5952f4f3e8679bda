// SPDX-License-Identifier: MIT OR Apache-2.0

//! Country–product trade networks built from RCA-filtered export records,
//! diffusion-based product recommendation, fitness–complexity ranking of
//! economies, time-split evaluation, and counterfactual basket simulations.

pub mod counterfactual;
pub mod diffusion;
pub mod error;
pub mod evaluation;
pub mod fitness;
pub mod format;
pub mod trade_graph;

pub use counterfactual::{CounterfactualReport, Mode, Scenario};
pub use diffusion::{Algorithm, DiffusionParams, RecommendationList, Recommender, ScoreMatrix};
pub use error::{Error, Result};
pub use evaluation::{EvaluationRun, SweepReport};
pub use fitness::{FitnessResult, SolverConfig, Tier, TierAssignment};
pub use trade_graph::{Bipartite, BipartiteSnapshot, ExportTable};
