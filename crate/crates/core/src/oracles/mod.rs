//! Ground truth on finite MDPs: exact dynamic programming, and the explicit
//! matrix form of the embedding estimate with its concentration and
//! confidence-set maximization checks.

mod dp;
mod embedding;

pub use dp::{evaluate_policy, regret_term, solve_dp, DpSolution};
pub use embedding::{ConcentrationResult, FiniteEmbeddingModel, OptimisticValue, ASCENT_TOLERANCE};
