use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lbgame_core::{Action, DEFAULT_ACTION_FLOOR};
use lbgame_nn::{
    gaussian_head_sample, hard_update, soft_update, squashed_mean, Adam, Checkpoint, Module, NnError, Real,
};
use lbgame_sim::rng::stream;

use crate::buffer::{ReplayBuffer, DEFAULT_BUFFER_CAPACITY};
use crate::nets::{Actor, Critic, CriticSet, Temperature};
use crate::sac::{
    actor_objective, critic_regression, critic_targets, draw_noise, mean_log_prob, Sequence, TargetParams,
};
use crate::MarlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Loss-bearing steps per sampled sequence.
    pub sequence_len: usize,
    pub burn_in: usize,
    pub buffer_capacity: usize,
    pub updates_per_episode: usize,
    pub gamma: f64,
    pub tau: f64,
    pub initial_alpha: f64,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
    pub single_critic: bool,
    pub action_floor: f64,
    /// Multiplies rewards inside the critic target only.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: 64,
            learning_rate: 3e-4,
            batch_size: 25,
            sequence_len: 8,
            burn_in: 4,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            updates_per_episode: 10,
            gamma: 0.99,
            tau: 0.005,
            initial_alpha: 0.1,
            target_entropy: None,
            single_critic: false,
            action_floor: DEFAULT_ACTION_FLOOR,
            reward_scale: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), MarlError> {
        let bad = |m: &str| Err(MarlError::Config(m.to_string()));
        if self.hidden == 0 || self.batch_size == 0 || self.sequence_len == 0 || self.buffer_capacity == 0 {
            return bad("hidden, batch_size, sequence_len and buffer_capacity must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.initial_alpha > 0.0 && self.initial_alpha.is_finite()) {
            return bad("initial_alpha must be positive");
        }
        if !(self.action_floor > 0.0 && self.action_floor < 1.0) {
            return bad("action_floor must lie in (0, 1)");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        Ok(())
    }

    pub fn target_entropy_for(&self, action_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(action_dim as f64))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActOutput<T> {
    pub action: Action<f64>,
    /// Squashed network output in (−1, 1).
    pub raw: Vec<f64>,
    pub hidden: Vec<T>,
    /// The network produced a non-finite value and the uniform action was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
}

/// One agent's independent SAC learner. Every update reads only this
/// struct: its own buffer, networks, optimisers and random stream.
#[derive(Debug, Clone)]
pub struct AgentLearner<T> {
    pub agent: usize,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub config: SacConfig,
    pub actor: Actor<T>,
    pub critics: CriticSet<T>,
    pub targets: CriticSet<T>,
    pub temperature: Temperature<T>,
    pub buffer: ReplayBuffer,
    actor_opt: Adam<T>,
    critic_opt: Adam<T>,
    alpha_opt: Adam<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> AgentLearner<T> {
    pub fn new(agent: usize, obs_dim: usize, action_dim: usize, config: SacConfig, seed: u64) -> Result<Self, MarlError> {
        config.validate()?;
        if action_dim == 0 {
            return Err(MarlError::Config("action dimension must be positive".into()));
        }
        let mut rng = stream(seed, "learner", agent as u64);
        let input = obs_dim + action_dim;
        let h = config.hidden;
        let n_critics = if config.single_critic { 1 } else { 2 };
        let actor = Actor::new(input, action_dim, h, &mut rng);
        let critics = CriticSet {
            critics: (0..n_critics)
                .map(|k| Critic::new(&format!("q{}", k + 1), input, action_dim, h, &mut rng))
                .collect(),
        };
        let mut targets = CriticSet {
            critics: (0..n_critics)
                .map(|k| Critic::new(&format!("q{}_target", k + 1), input, action_dim, h, &mut rng))
                .collect(),
        };
        hard_update(&mut targets, &critics)?;
        let lr = T::c(config.learning_rate);
        Ok(Self {
            agent,
            obs_dim,
            action_dim,
            actor,
            critics,
            targets,
            temperature: Temperature::new(config.initial_alpha),
            buffer: ReplayBuffer::new(config.buffer_capacity, obs_dim, action_dim),
            actor_opt: Adam::new(lr),
            critic_opt: Adam::new(lr),
            alpha_opt: Adam::new(lr),
            rng,
            config,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.temperature.alpha().f64()
    }

    pub fn initial_hidden(&self) -> Vec<T> {
        vec![T::zero(); self.config.hidden]
    }

    /// Runs the recurrent actor one step on `[o_t, a_{t−1}]`.
    pub fn act<R: Rng + ?Sized>(
        &self,
        agent: usize,
        observation: &[f64],
        prev_raw: &[f64],
        hidden: &[T],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<ActOutput<T>, MarlError> {
        let x: Vec<T> = observation.iter().chain(prev_raw).map(|&v| T::c(v)).collect();
        let st = self.actor.step(&x, hidden)?;
        let raw: Vec<f64> = match mode {
            ActMode::Train => gaussian_head_sample(&st.mean, &st.log_std, rng)?.action,
            ActMode::Eval => squashed_mean(&st.mean),
        }
        .iter()
        .map(|v| v.f64())
        .collect();
        let finite = raw.iter().all(|v| v.is_finite()) && st.enc.h.iter().all(|v| v.is_finite());
        if !finite {
            log::warn!("agent {agent}: non-finite actor output, falling back to the uniform action");
            return Ok(ActOutput {
                action: Action::uniform(agent, self.action_dim)?,
                raw: vec![0.0; self.action_dim],
                hidden: self.initial_hidden(),
                fallback: true,
            });
        }
        let weights: Vec<f64> = raw.iter().map(|r| (r + 1.0) / 2.0).collect();
        Ok(ActOutput {
            action: Action::from_raw(agent, &weights, self.config.action_floor)?,
            raw,
            hidden: st.enc.h,
            fallback: false,
        })
    }

    pub fn sample_batch(&mut self) -> Vec<Sequence<T>> {
        self.buffer
            .sample_sequences(self.config.batch_size, self.config.sequence_len, self.config.burn_in, &mut self.rng)
            .iter()
            .map(Sequence::from_sample)
            .collect()
    }

    fn target_params(&self) -> TargetParams<T> {
        TargetParams {
            gamma: T::c(self.config.gamma),
            alpha: self.temperature.alpha(),
            reward_scale: T::c(self.config.reward_scale),
        }
    }

    /// One TD step of every online critic toward the target-critic soft value.
    pub fn critic_update(&mut self, batch: &[Sequence<T>]) -> Result<Option<f64>, MarlError> {
        if batch.is_empty() {
            return Ok(None);
        }
        let noise = draw_noise(batch, self.action_dim, &mut self.rng);
        let ys = critic_targets(&self.targets, &self.actor, self.target_params(), batch, &noise)?;
        self.critics.zero_grad();
        let loss = critic_regression(&mut self.critics, batch, &ys, true)?;
        self.critic_opt.step(&mut self.critics);
        Ok(Some(loss.f64()))
    }

    /// One reparameterised step on the actor; returns `(loss, mean log π)`.
    pub fn actor_update(&mut self, batch: &[Sequence<T>]) -> Result<Option<(f64, f64)>, MarlError> {
        if batch.is_empty() {
            return Ok(None);
        }
        let noise = draw_noise(batch, self.action_dim, &mut self.rng);
        self.actor.zero_grad();
        let alpha = self.temperature.alpha();
        let (loss, logp) = actor_objective(&mut self.actor, &self.critics, alpha, batch, &noise, true)?;
        self.actor_opt.step(&mut self.actor);
        Ok(Some((loss.f64(), logp.f64())))
    }

    /// Gradient step on `log α` for `E[−log α (log π + H̄)]` given a mean log π.
    pub fn temperature_step(&mut self, mean_log_prob: f64) -> f64 {
        let target = self.config.target_entropy_for(self.action_dim);
        self.temperature.log_alpha.grad[0] = T::c(-(mean_log_prob + target));
        self.alpha_opt.step(&mut self.temperature);
        self.alpha()
    }

    pub fn temperature_update(&mut self, batch: &[Sequence<T>]) -> Result<f64, MarlError> {
        if batch.is_empty() {
            return Ok(self.alpha());
        }
        let noise = draw_noise(batch, self.action_dim, &mut self.rng);
        let logp = mean_log_prob(&self.actor, batch, &noise)?.f64();
        Ok(self.temperature_step(logp))
    }

    /// Critic, actor and temperature steps on one sampled batch, then a
    /// soft target update. `None` when the buffer cannot yield a sequence.
    pub fn update(&mut self) -> Result<Option<UpdateStats>, MarlError> {
        let batch = self.sample_batch();
        let Some(critic_loss) = self.critic_update(&batch)? else {
            return Ok(None);
        };
        let (actor_loss, logp) = self.actor_update(&batch)?.expect("batch is nonempty");
        let alpha = self.temperature_step(logp);
        soft_update(&mut self.targets, &self.critics, T::c(self.config.tau))?;
        for (what, v) in [("critic", critic_loss), ("actor", actor_loss)] {
            if !v.is_finite() {
                return Err(MarlError::Update(format!("agent {}: non-finite {what} loss", self.agent)));
            }
        }
        Ok(Some(UpdateStats {
            critic_loss,
            actor_loss,
            alpha,
            mean_log_prob: logp,
        }))
    }

    pub fn checkpoint(&self, config_hash: &str) -> Checkpoint {
        let mut ck = Checkpoint::new(config_hash);
        ck.meta.insert("agent".into(), self.agent.to_string());
        ck.meta.insert("obs_dim".into(), self.obs_dim.to_string());
        ck.meta.insert("action_dim".into(), self.action_dim.to_string());
        ck.meta.insert("hidden".into(), self.config.hidden.to_string());
        ck.add_module(&self.actor);
        ck.add_module(&self.critics);
        ck.add_module(&self.targets);
        ck.add_module(&self.temperature);
        ck
    }

    pub fn restore(&mut self, ck: &Checkpoint) -> Result<(), MarlError> {
        for (key, want) in [("obs_dim", self.obs_dim), ("action_dim", self.action_dim), ("hidden", self.config.hidden)] {
            let got = ck.meta.get(key).and_then(|v| v.parse::<usize>().ok());
            if got != Some(want) {
                return Err(MarlError::Nn(NnError::Checkpoint(format!(
                    "checkpoint {key} is {got:?}, learner expects {want}"
                ))));
            }
        }
        ck.restore_module(&mut self.actor)?;
        ck.restore_module(&mut self.critics)?;
        ck.restore_module(&mut self.targets)?;
        ck.restore_module(&mut self.temperature)?;
        Ok(())
    }
}
