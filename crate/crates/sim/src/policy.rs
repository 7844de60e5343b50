use rand::Rng;
use serde::{Deserialize, Serialize};

use lbgame_core::{assign_server, Action};

use crate::observe::FeatureVector;
use crate::rng::SimRng;
use crate::server::ServerSnapshot;
use crate::traffic::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ecmp,
    Wcmp,
    Lsq,
    Sed,
    Oracle,
    Rl,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::Ecmp,
        PolicyKind::Wcmp,
        PolicyKind::Lsq,
        PolicyKind::Sed,
        PolicyKind::Oracle,
        PolicyKind::Rl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Ecmp => "ecmp",
            PolicyKind::Wcmp => "wcmp",
            PolicyKind::Lsq => "lsq",
            PolicyKind::Sed => "sed",
            PolicyKind::Oracle => "oracle",
            PolicyKind::Rl => "rl",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown policy '{s}'"))
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PolicyError {
    #[error("weights must be positive and finite: {0:?}")]
    Weights(Vec<f64>),
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error(transparent)]
    Core(#[from] lbgame_core::CoreError),
}

/// What an agent knows locally when dispatching.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentLocalState {
    pub q: Vec<u32>,
    pub weights: Vec<f64>,
}

impl AgentLocalState {
    pub fn new(q: Vec<u32>, weights: Vec<f64>) -> Result<Self, PolicyError> {
        check_weights(&weights)?;
        if q.len() != weights.len() {
            return Err(PolicyError::Length(q.len(), weights.len()));
        }
        Ok(Self { q, weights })
    }

    pub fn record_assignment(&mut self, server: usize) {
        self.q[server] += 1;
    }
}

fn check_weights(w: &[f64]) -> Result<(), PolicyError> {
    if w.is_empty() || w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(PolicyError::Weights(w.to_vec()));
    }
    Ok(())
}

fn argmin_by<F: Fn(usize) -> f64>(n: usize, f: F) -> usize {
    let mut best = 0;
    let mut best_v = f(0);
    for j in 1..n {
        let v = f(j);
        if v < best_v {
            best = j;
            best_v = v;
        }
    }
    best
}

pub fn ecmp_assign(n: usize, rng: &mut SimRng) -> usize {
    assert!(n >= 1);
    rng.gen_range(0..n)
}

pub fn wcmp_assign(weights: &[f64], rng: &mut SimRng) -> Result<usize, PolicyError> {
    check_weights(weights)?;
    let total: f64 = weights.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (j, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(j);
        }
    }
    Ok(weights.len() - 1)
}

pub fn lsq_assign(state: &AgentLocalState) -> usize {
    argmin_by(state.q.len(), |j| f64::from(state.q[j]))
}

pub fn sed_assign(state: &AgentLocalState) -> Result<usize, PolicyError> {
    check_weights(&state.weights)?;
    Ok(argmin_by(state.q.len(), |j| {
        (f64::from(state.q[j]) + 1.0) / state.weights[j]
    }))
}

pub fn rl_assign(state: &AgentLocalState, action: &Action<f64>) -> Result<usize, PolicyError> {
    Ok(assign_server(&state.q, action)?)
}

/// Full server state handed to the Oracle. Only the simulator can build one.
pub struct OracleView<'a> {
    pub(crate) servers: Vec<ServerSnapshot>,
    pub(crate) task: &'a [Stage],
}

impl OracleView<'_> {
    pub fn servers(&self) -> &[ServerSnapshot] {
        &self.servers
    }
}

/// Server on which the new task itself would finish soonest.
pub fn oracle_assign(view: &OracleView<'_>) -> usize {
    let times = crate::engine::remaining_time_vector(&view.servers, Some(view.task));
    argmin_by(times.len(), |j| times[j])
}

/// Snapshot handed to a learning policy at each decision tick.
pub struct TickContext<'a> {
    pub agent: usize,
    pub tick: usize,
    pub time: f64,
    pub observation: &'a FeatureVector,
    /// Reward for the interval that just ended; 0 at the first tick.
    pub reward: f64,
    /// True at the tick closing the episode; the returned action is unused.
    pub terminal: bool,
}

/// Source of per-tick weight vectors (the RL actor, or a fixed action).
pub trait ActionSource {
    fn act(&mut self, ctx: &TickContext<'_>) -> Action<f64>;
}

/// Always returns the same weights.
#[derive(Debug, Clone)]
pub struct FixedAction(pub Action<f64>);

impl ActionSource for FixedAction {
    fn act(&mut self, _ctx: &TickContext<'_>) -> Action<f64> {
        self.0.clone()
    }
}

impl<T: ActionSource + ?Sized> ActionSource for &mut T {
    fn act(&mut self, ctx: &TickContext<'_>) -> Action<f64> {
        (**self).act(ctx)
    }
}

impl<T: ActionSource + ?Sized> ActionSource for Box<T> {
    fn act(&mut self, ctx: &TickContext<'_>) -> Action<f64> {
        (**self).act(ctx)
    }
}

pub enum AgentPolicy<'a> {
    Ecmp,
    Wcmp(Vec<f64>),
    Lsq,
    Sed(Vec<f64>),
    Oracle,
    Rl(Box<dyn ActionSource + 'a>),
}

impl<'a> AgentPolicy<'a> {
    pub fn kind(&self) -> PolicyKind {
        match self {
            AgentPolicy::Ecmp => PolicyKind::Ecmp,
            AgentPolicy::Wcmp(_) => PolicyKind::Wcmp,
            AgentPolicy::Lsq => PolicyKind::Lsq,
            AgentPolicy::Sed(_) => PolicyKind::Sed,
            AgentPolicy::Oracle => PolicyKind::Oracle,
            AgentPolicy::Rl(_) => PolicyKind::Rl,
        }
    }

    /// Baseline with weights defaulting to the servers' nominal capacities.
    pub fn baseline(kind: PolicyKind, weights: &[f64]) -> Option<Self> {
        Some(match kind {
            PolicyKind::Ecmp => AgentPolicy::Ecmp,
            PolicyKind::Wcmp => AgentPolicy::Wcmp(weights.to_vec()),
            PolicyKind::Lsq => AgentPolicy::Lsq,
            PolicyKind::Sed => AgentPolicy::Sed(weights.to_vec()),
            PolicyKind::Oracle => AgentPolicy::Oracle,
            PolicyKind::Rl => return None,
        })
    }
}

impl std::fmt::Debug for AgentPolicy<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.kind().name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn st(q: &[u32], w: &[f64]) -> AgentLocalState {
        AgentLocalState::new(q.to_vec(), w.to_vec()).unwrap()
    }

    #[test]
    fn lsq_examples() {
        assert_eq!(lsq_assign(&st(&[3, 1, 2], &[1.0; 3])), 1);
        assert_eq!(lsq_assign(&st(&[0, 0], &[1.0; 2])), 0);
        let mut s = st(&[3, 1, 2], &[1.0; 3]);
        let j = lsq_assign(&s);
        s.record_assignment(j);
        assert_eq!(s.q, vec![3, 2, 2]);
    }

    #[test]
    fn sed_examples() {
        assert_eq!(sed_assign(&st(&[2, 3], &[1.0, 2.0])).unwrap(), 1);
        assert_eq!(sed_assign(&st(&[3, 1], &[2.0, 1.0])).unwrap(), 0);
    }

    #[test]
    fn rl_examples() {
        let a = Action::new(0, vec![0.3, 0.7]).unwrap();
        assert_eq!(rl_assign(&st(&[0, 0], &[1.0; 2]), &a).unwrap(), 1);
        let u = Action::uniform(0, 2).unwrap();
        assert_eq!(rl_assign(&st(&[4, 1], &[1.0; 2]), &u).unwrap(), 1);
        assert_eq!(rl_assign(&st(&[1, 1], &[1.0; 2]), &u).unwrap(), 0);
    }

    #[test]
    fn wcmp_rejects_zero_weight() {
        let mut rng = stream(1, "policy", 0);
        assert!(wcmp_assign(&[1.0, 0.0], &mut rng).is_err());
        assert!(AgentLocalState::new(vec![0, 0], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn ecmp_single_server() {
        let mut rng = stream(1, "policy", 0);
        assert!((0..100).all(|_| ecmp_assign(1, &mut rng) == 0));
    }

    fn idle(id: usize) -> ServerSnapshot {
        ServerSnapshot::idle(lbgame_core::ServerSpec::new(id, 1.0, 1, 1).unwrap(), 64)
    }

    #[test]
    fn oracle_examples() {
        let one = [Stage { kind: crate::traffic::QueueKind::Cpu, work: 1.0 }];
        let view = OracleView { servers: vec![idle(0), idle(1), idle(2)], task: &one };
        assert_eq!(oracle_assign(&view), 0);

        let mut busy = idle(0);
        busy.admit(&[Stage { kind: crate::traffic::QueueKind::Cpu, work: 10.0 }]);
        let view = OracleView { servers: vec![busy, idle(1)], task: &one };
        assert_eq!(oracle_assign(&view), 1);
    }

    #[test]
    fn kind_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("maglev".parse::<PolicyKind>().is_err());
    }
}

