//! Discrete-time Markov chain over the queue lengths `(l_1, l_2)` of two
//! servers, fed by an observed stream routed by a load-balancing policy and an
//! unobserved stream split uniformly.
//!
//! At most one arrival or departure happens per timeslot, so every row of the
//! transition operator has at most five nonzero entries.

mod chain;
mod scenario;

pub use chain::{
    build_transition, stationary, weighted_service_duration, ChainConfig, ChainDistribution,
    ChainError, ChainPolicy, TransitionOperator, DEFAULT_MAX_ITERATIONS,
};
pub use scenario::{evaluate, scenario_sweep, Preset, ScenarioRow, ScenarioSetup};

pub type ChainConfigF64 = ChainConfig<f64>;
pub type ChainDistributionF64 = ChainDistribution<f64>;
