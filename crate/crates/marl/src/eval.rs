use lbgame_core::Action;
use lbgame_nn::Real;
use lbgame_sim::rng::stream;
use lbgame_sim::{run_episode, AgentPolicy, FixedAction, PolicyKind, SimConfig, SimTrace};

use crate::learner::{ActMode, AgentLearner};
use crate::rollout::LearnerPolicy;
use crate::MarlError;

/// What one agent runs during an evaluation episode.
#[derive(Debug, Clone, Copy)]
pub enum AgentChoice<'a, T> {
    Learned(&'a AgentLearner<T>),
    Baseline(PolicyKind),
    /// The constant uniform weight vector fed through the RL dispatch rule.
    Uniform,
}

impl<T> AgentChoice<'_, T> {
    pub fn label(&self) -> String {
        match self {
            AgentChoice::Learned(_) => "distr-lb".into(),
            AgentChoice::Baseline(k) => k.name().to_string(),
            AgentChoice::Uniform => "uniform".into(),
        }
    }
}

/// Runs one episode with per-agent choices; learned agents act in `mode`.
pub fn evaluate_episode<T: Real>(
    cfg: &SimConfig,
    choices: &[AgentChoice<'_, T>],
    mode: ActMode,
    seed: u64,
) -> Result<SimTrace, MarlError> {
    if choices.len() != cfg.agents {
        return Err(MarlError::Config(format!("{} policies for {} agents", choices.len(), cfg.agents)));
    }
    let weights = cfg.nominal_weights();
    let mut runners: Vec<Option<LearnerPolicy<'_, T>>> = choices
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            AgentChoice::Learned(l) => Some(LearnerPolicy::new(l, i, mode, stream(seed, "eval", i as u64), 0)),
            _ => None,
        })
        .collect();
    let mut policies = Vec::with_capacity(choices.len());
    for (i, (c, r)) in choices.iter().zip(runners.iter_mut()).enumerate() {
        policies.push(match c {
            AgentChoice::Learned(_) => AgentPolicy::Rl(Box::new(r.as_mut().expect("runner built"))),
            AgentChoice::Baseline(k) => AgentPolicy::baseline(*k, &weights)
                .ok_or_else(|| MarlError::Config(format!("{} is not a baseline", k.name())))?,
            AgentChoice::Uniform => AgentPolicy::Rl(Box::new(FixedAction(Action::uniform(i, cfg.servers.len())?))),
        });
    }
    let trace = run_episode(cfg, &mut policies, seed)?;
    drop(policies);
    if let Some(e) = runners.iter().flatten().find_map(|r| r.error.clone()) {
        return Err(MarlError::Update(e));
    }
    Ok(trace)
}
