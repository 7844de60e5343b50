//! Seeded discrete-event simulator for multi-agent network load balancing,
//! with the classical dispatch baselines and the local observation pipeline.

pub mod engine;
pub mod observe;
pub mod policy;
pub mod rng;
pub mod server;
pub mod trace;
pub mod traffic;

pub use engine::{
    remaining_time_vector, run_episode, run_episode_with_arrivals, CapacityChange, SimConfig,
    SimError, DEFAULT_TICK,
};
pub use observe::{
    build_observation, reduce_stats, AgentChannels, FeatureVector, ObservationScales,
    ReservoirBuffer,
};
pub use policy::{
    ecmp_assign, lsq_assign, oracle_assign, rl_assign, sed_assign, wcmp_assign, ActionSource,
    AgentLocalState, AgentPolicy, FixedAction, OracleView, PolicyError, PolicyKind, TickContext,
};
pub use server::{
    admit_or_reject, cpu_speed_per_task, io_speed_per_task, server_aggregate_speed, Admission,
    PendingJob, ServerRuntime, ServerSnapshot,
};
pub use trace::{AgentStep, Counts, SimTrace, TaskRecord, TaskStatus, TickSnapshot};
pub use traffic::{
    generate_arrivals, sample_latency, AppProfile, ArrivalSpec, QueueKind, Stage, StageTemplate,
    TrafficProfile,
};
