//! Independent recurrent soft actor-critic learners, one per load balancer,
//! trained on their own local experience only.

pub mod buffer;
pub mod eval;
pub mod learner;
pub mod nets;
pub mod probe;
pub mod rollout;
pub mod sac;
pub mod train;

pub use buffer::{BufferError, ReplayBuffer, SequenceSample, TransitionRecord, DEFAULT_BUFFER_CAPACITY};
pub use eval::{evaluate_episode, AgentChoice};
pub use learner::{ActMode, ActOutput, AgentLearner, SacConfig, UpdateStats};
pub use nets::{Actor, Critic, CriticSet, Encoder, Temperature};
pub use probe::{mean_half_width, ne_gap_probe, Deviation, GapEstimate, NeGapReport};
pub use rollout::LearnerPolicy;
pub use sac::{
    actor_objective, critic_regression, critic_targets, draw_noise, mean_log_prob, NoiseTable, Sequence,
    TargetParams,
};
pub use train::{
    checkpoint_path, episode_seed, new_learners, train, write_learning_curve, CurveRow, TrainConfig, TrainOutcome,
};

pub type AgentLearnerF64 = AgentLearner<f64>;
pub type AgentLearnerF32 = AgentLearner<f32>;

#[derive(Debug, thiserror::Error)]
pub enum MarlError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] lbgame_nn::NnError),
    #[error(transparent)]
    Sim(#[from] lbgame_sim::SimError),
    #[error(transparent)]
    Core(#[from] lbgame_core::CoreError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error("update failed: {0}")]
    Update(String),
    #[error("io error: {0}")]
    Io(String),
}
