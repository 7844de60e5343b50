use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::Serialize;

use lbgame_nn::Real;
use lbgame_sim::rng::stream;
use lbgame_sim::{run_episode, AgentPolicy, SimConfig};

use crate::learner::{ActMode, AgentLearner, SacConfig, UpdateStats};
use crate::rollout::LearnerPolicy;
use crate::MarlError;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sim: SimConfig,
    pub sac: SacConfig,
    pub episodes: usize,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
    /// Episodes between checkpoint writes; the final episode is always written.
    pub checkpoint_every: usize,
    pub config_hash: String,
}

impl TrainConfig {
    pub fn new(sim: SimConfig, sac: SacConfig, episodes: usize, seed: u64) -> Self {
        Self {
            sim,
            sac,
            episodes,
            seed,
            checkpoint_dir: None,
            checkpoint_every: 10,
            config_hash: String::new(),
        }
    }
}

/// One learning-curve CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub episode: usize,
    pub agent: usize,
    pub mean_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub learners: Vec<AgentLearner<T>>,
    pub curve: Vec<CurveRow>,
    /// `[agent][episode]` mean per-tick reward.
    pub episode_rewards: Vec<Vec<f64>>,
    pub fallbacks: u64,
}

/// Simulator seed of training episode `e`.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    stream(seed, "episode", episode as u64).next_u64()
}

pub fn checkpoint_path(dir: &Path, agent: usize) -> PathBuf {
    dir.join(format!("agent{agent}.ckpt"))
}

pub fn new_learners<T: Real>(sim: &SimConfig, sac: &SacConfig, seed: u64) -> Result<Vec<AgentLearner<T>>, MarlError> {
    let n = sim.servers.len();
    (0..sim.agents)
        .map(|i| AgentLearner::new(i, sim.observation_dim(), n, sac.clone(), seed))
        .collect()
}

fn save_all<T: Real>(dir: &Path, learners: &[AgentLearner<T>], hash: &str, episode: usize) -> Result<(), MarlError> {
    std::fs::create_dir_all(dir).map_err(|e| MarlError::Io(format!("{}: {e}", dir.display())))?;
    for l in learners {
        let mut ck = l.checkpoint(hash);
        ck.meta.insert("episode".into(), episode.to_string());
        ck.save(&checkpoint_path(dir, l.agent))?;
    }
    Ok(())
}

/// Episodic independent training: roll out all agents together, then each
/// agent runs its updates on its own buffer.
pub fn train<T: Real>(cfg: &TrainConfig) -> Result<TrainOutcome<T>, MarlError> {
    cfg.sim.validate()?;
    let mut learners = new_learners::<T>(&cfg.sim, &cfg.sac, cfg.seed)?;
    train_from(cfg, &mut learners).map(|(curve, episode_rewards, fallbacks)| TrainOutcome {
        learners,
        curve,
        episode_rewards,
        fallbacks,
    })
}

type Progress = (Vec<CurveRow>, Vec<Vec<f64>>, u64);

fn train_from<T: Real>(cfg: &TrainConfig, learners: &mut [AgentLearner<T>]) -> Result<Progress, MarlError> {
    let m = cfg.sim.agents;
    let mut curve = Vec::with_capacity(cfg.episodes * m);
    let mut rewards = vec![Vec::with_capacity(cfg.episodes); m];
    let mut fallbacks = 0;
    for e in 0..cfg.episodes {
        let sim_seed = episode_seed(cfg.seed, e);
        let (trace, batches) = {
            let mut runners: Vec<LearnerPolicy<'_, T>> = learners
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    let rng = stream(sim_seed, "rollout", i as u64);
                    LearnerPolicy::new(l, i, ActMode::Train, rng, e as u64)
                })
                .collect();
            let mut policies: Vec<AgentPolicy<'_>> =
                runners.iter_mut().map(|r| AgentPolicy::Rl(Box::new(r))).collect();
            let trace = run_episode(&cfg.sim, &mut policies, sim_seed)?;
            drop(policies);
            if let Some(err) = runners.iter().find_map(|r| r.error.clone()) {
                return Err(MarlError::Update(err));
            }
            fallbacks += runners.iter().map(|r| r.fallbacks).sum::<u64>();
            let batches: Vec<_> = runners.into_iter().map(|r| r.transitions).collect();
            (trace, batches)
        };
        let mut failure = None;
        for (i, (learner, transitions)) in learners.iter_mut().zip(batches).enumerate() {
            for t in transitions {
                learner.buffer.push(t)?;
            }
            let mut last = UpdateStats {
                alpha: learner.alpha(),
                ..Default::default()
            };
            for _ in 0..cfg.sac.updates_per_episode {
                match learner.update() {
                    Ok(Some(s)) => last = s,
                    Ok(None) => {}
                    Err(err) => {
                        failure = Some(err);
                        break;
                    }
                }
            }
            if failure.is_some() {
                break;
            }
            let steps = trace.agent_steps[i].len().saturating_sub(1).max(1);
            let mean_reward = trace.episode_reward(i) / steps as f64;
            rewards[i].push(mean_reward);
            curve.push(CurveRow {
                episode: e,
                agent: i,
                mean_reward,
                actor_loss: last.actor_loss,
                critic_loss: last.critic_loss,
                alpha: last.alpha,
            });
        }
        if let Some(err) = failure {
            if let Some(dir) = &cfg.checkpoint_dir {
                save_all(dir, learners, &cfg.config_hash, e)?;
            }
            return Err(err);
        }
        log::info!(
            "episode {e}: mean reward {:?}",
            rewards.iter().map(|r| r[e]).collect::<Vec<_>>()
        );
        if let Some(dir) = &cfg.checkpoint_dir {
            let every = cfg.checkpoint_every.max(1);
            if (e + 1) % every == 0 || e + 1 == cfg.episodes {
                save_all(dir, learners, &cfg.config_hash, e + 1)?;
            }
        }
    }
    Ok((curve, rewards, fallbacks))
}

pub fn write_learning_curve(path: &Path, rows: &[CurveRow]) -> Result<(), MarlError> {
    let io = |e: csv::Error| MarlError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    if rows.is_empty() {
        w.write_record(["episode", "agent", "mean_reward", "actor_loss", "critic_loss", "alpha"])
            .map_err(io)?;
    }
    for r in rows {
        w.serialize(r).map_err(io)?;
    }
    w.flush().map_err(|e| MarlError::Io(format!("{}: {e}", path.display())))
}
