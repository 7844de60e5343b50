use rand_chacha::ChaCha8Rng;

use lbgame_core::Action;
use lbgame_nn::Real;
use lbgame_sim::{ActionSource, TickContext};

use crate::buffer::TransitionRecord;
use crate::learner::{ActMode, AgentLearner};

struct Pending {
    prev_action: Vec<f64>,
    observation: Vec<f64>,
    action: Vec<f64>,
    step: usize,
}

/// Drives a learner's actor inside the simulator and records the agent's
/// own transitions. The reward at tick `t+1` closes the transition opened at `t`.
pub struct LearnerPolicy<'a, T> {
    learner: &'a AgentLearner<T>,
    agent: usize,
    mode: ActMode,
    rng: ChaCha8Rng,
    hidden: Vec<T>,
    prev_raw: Vec<f64>,
    current: Action<f64>,
    pending: Option<Pending>,
    episode: u64,
    record: bool,
    pub transitions: Vec<TransitionRecord>,
    pub fallbacks: u64,
    pub error: Option<String>,
}

impl<'a, T: Real> LearnerPolicy<'a, T> {
    pub fn new(learner: &'a AgentLearner<T>, agent: usize, mode: ActMode, rng: ChaCha8Rng, episode: u64) -> Self {
        let n = learner.action_dim;
        Self {
            learner,
            agent,
            mode,
            rng,
            hidden: learner.initial_hidden(),
            prev_raw: vec![0.0; n],
            current: Action::uniform(agent, n).expect("positive action dimension"),
            pending: None,
            episode,
            record: mode == ActMode::Train,
            transitions: Vec::new(),
            fallbacks: 0,
            error: None,
        }
    }

    /// Keep transitions even in eval mode.
    pub fn recording(mut self, on: bool) -> Self {
        self.record = on;
        self
    }
}

impl<T: Real> ActionSource for LearnerPolicy<'_, T> {
    fn act(&mut self, ctx: &TickContext<'_>) -> Action<f64> {
        let obs = &ctx.observation.values;
        if let Some(p) = self.pending.take() {
            if self.record {
                self.transitions.push(TransitionRecord {
                    prev_action: p.prev_action,
                    observation: p.observation,
                    action: p.action,
                    reward: ctx.reward,
                    next_observation: obs.clone(),
                    episode: self.episode,
                    step: p.step,
                });
            }
        }
        if ctx.terminal || self.error.is_some() {
            return self.current.clone();
        }
        match self.learner.act(self.agent, obs, &self.prev_raw, &self.hidden, self.mode, &mut self.rng) {
            Ok(out) => {
                if out.fallback {
                    self.fallbacks += 1;
                }
                self.pending = Some(Pending {
                    prev_action: std::mem::replace(&mut self.prev_raw, out.raw.clone()),
                    observation: obs.clone(),
                    action: out.raw,
                    step: ctx.tick,
                });
                self.hidden = out.hidden;
                self.current = out.action;
            }
            Err(e) => self.error = Some(format!("agent {} tick {}: {e}", self.agent, ctx.tick)),
        }
        self.current.clone()
    }
}
