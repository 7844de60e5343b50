//! Domain types and the fairness calculus for multi-agent network load balancing.
//!
//! The math is generic over [`Scalar`], so the same code runs on `f32`, `f64`
//! and exact rationals. Operations that need transcendental functions (the
//! coefficient of variation, the log-variance reward) require
//! [`num_traits::Float`]. The aliases at the bottom of this file are the
//! concrete types the simulator and the learners use.

pub mod assign;
pub mod bruteforce;
pub mod error;
pub mod fairness;
pub mod load;
pub mod reward;
pub mod scalar;

pub use assign::{assign_server, Action, DEFAULT_ACTION_FLOOR};
pub use bruteforce::{argmax_fairness_bruteforce, BruteForceResult, GridObjective, MAX_GRID_POINTS};
pub use error::{CoreError, Result};
pub use fairness::{
    cv, makespan, pbf, per_agent_vbf, potential, potential_decomposition, vbf, vbf_decomposition,
    FairnessKind, FairnessScore, PotentialDecomposition, VbfDecomposition,
};
pub use load::{LoadVector, PerAgentLoadMatrix, ServerSpec};
pub use reward::{reward, DEFAULT_LOG_EPSILON};
pub use scalar::Scalar;

/// Exact rational scalar used by the brute-force oracles.
pub type Rational = num_rational::Ratio<i64>;

pub type LoadVectorF64 = LoadVector<f64>;
pub type LoadVectorF32 = LoadVector<f32>;
pub type LoadVectorExact = LoadVector<Rational>;
pub type PerAgentLoadMatrixF64 = PerAgentLoadMatrix<f64>;
pub type ActionF64 = Action<f64>;
pub type FairnessScoreF64 = FairnessScore<f64>;
