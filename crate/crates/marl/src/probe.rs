use statrs::distribution::{ContinuousCDF, StudentsT};

use lbgame_nn::Real;
use lbgame_sim::{PolicyKind, SimConfig};

use crate::eval::{evaluate_episode, AgentChoice};
use crate::learner::{ActMode, AgentLearner};
use crate::train::episode_seed;
use crate::MarlError;

/// A unilateral replacement for one agent's trained policy.
#[derive(Debug, Clone, Copy)]
pub enum Deviation<'a, T> {
    Lsq,
    Sed,
    Uniform,
    /// Agent `i` switches to `learners[i]` (e.g. from another training seed).
    Policy { label: &'a str, learners: &'a [AgentLearner<T>] },
}

impl<'a, T> Deviation<'a, T> {
    pub fn label(&self) -> String {
        match self {
            Deviation::Lsq => "lsq".into(),
            Deviation::Sed => "sed".into(),
            Deviation::Uniform => "uniform".into(),
            Deviation::Policy { label, .. } => label.to_string(),
        }
    }

    fn choice(&self, agent: usize) -> AgentChoice<'a, T> {
        match *self {
            Deviation::Lsq => AgentChoice::Baseline(PolicyKind::Lsq),
            Deviation::Sed => AgentChoice::Baseline(PolicyKind::Sed),
            Deviation::Uniform => AgentChoice::Uniform,
            Deviation::Policy { learners, .. } => AgentChoice::Learned(&learners[agent]),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEstimate {
    pub agent: usize,
    pub deviation: String,
    pub joint_value: f64,
    pub deviation_value: f64,
    /// Mean paired difference `V_i(deviation) − V_i(joint)`.
    pub mean_gain: f64,
    /// 95% Student-t half-width of `mean_gain`.
    pub half_width: f64,
    pub episodes: usize,
}

impl GapEstimate {
    /// The deviation gains more than `k` half-widths.
    pub fn exceeds(&self, k: f64) -> bool {
        self.mean_gain > k * self.half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeGapReport {
    pub estimates: Vec<GapEstimate>,
    /// Per agent, the largest mean gain over all deviations.
    pub gaps: Vec<f64>,
}

/// Mean and 95% half-width of paired samples.
pub fn mean_half_width(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Monte-Carlo values (episodic cumulative reward) under the joint trained
/// policy and under every unilateral deviation, over paired seeds.
pub fn ne_gap_probe<T: Real>(
    cfg: &SimConfig,
    learners: &[AgentLearner<T>],
    deviations: &[Deviation<'_, T>],
    episodes: usize,
    seed: u64,
    mode: ActMode,
) -> Result<NeGapReport, MarlError> {
    let m = cfg.agents;
    if learners.len() != m {
        return Err(MarlError::Config(format!("{} learners for {m} agents", learners.len())));
    }
    let joint: Vec<AgentChoice<'_, T>> = learners.iter().map(AgentChoice::Learned).collect();
    let seeds: Vec<u64> = (0..episodes).map(|e| episode_seed(seed, e)).collect();
    let mut base = vec![Vec::with_capacity(episodes); m];
    for &s in &seeds {
        let trace = evaluate_episode(cfg, &joint, mode, s)?;
        for (i, b) in base.iter_mut().enumerate() {
            b.push(trace.episode_reward(i));
        }
    }
    let mut estimates = Vec::new();
    let mut gaps = vec![f64::NEG_INFINITY; m];
    for i in 0..m {
        for d in deviations {
            let mut choices = joint.clone();
            choices[i] = d.choice(i);
            let mut values = Vec::with_capacity(episodes);
            for &s in &seeds {
                values.push(evaluate_episode(cfg, &choices, mode, s)?.episode_reward(i));
            }
            let diffs: Vec<f64> = values.iter().zip(&base[i]).map(|(v, b)| v - b).collect();
            let (mean_gain, half_width) = mean_half_width(&diffs);
            gaps[i] = gaps[i].max(mean_gain);
            estimates.push(GapEstimate {
                agent: i,
                deviation: d.label(),
                joint_value: base[i].iter().sum::<f64>() / episodes.max(1) as f64,
                deviation_value: values.iter().sum::<f64>() / episodes.max(1) as f64,
                mean_gain,
                half_width,
                episodes,
            });
        }
    }
    Ok(NeGapReport { estimates, gaps })
}
