use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use lbgame_core::{reward, Action, FairnessKind, LoadVector, PerAgentLoadMatrix, ServerSpec};

use crate::observe::{
    build_observation, reduce_stats, AgentChannels, FeatureVector, ObservationError,
    ObservationScales, DEFAULT_FEATURE_DISCOUNT, DEFAULT_RESERVOIR_SIZE,
};
use crate::policy::{
    ecmp_assign, lsq_assign, oracle_assign, rl_assign, sed_assign, wcmp_assign, AgentLocalState,
    AgentPolicy, OracleView, PolicyError, PolicyKind, TickContext,
};
use crate::rng::{stream, SimRng};
use crate::server::{
    admit_or_reject, Admission, PendingJob, ServerRuntime, ServerSnapshot, TaskId,
    DEFAULT_BACKLOG_CAPACITY, DEFAULT_REJECT_TIMEOUT,
};
use crate::trace::{AgentStep, Counts, SimTrace, TaskRecord, TaskStatus, TickSnapshot};
use crate::traffic::{
    generate_arrivals, sample_latency, ArrivalSpec, QueueKind, Stage, TrafficProfile,
    DEFAULT_LATENCY_RANGE,
};

pub const DEFAULT_TICK: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityChange {
    pub server: usize,
    pub time: f64,
    pub cpu_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub servers: Vec<ServerSpec>,
    pub agents: usize,
    pub traffic: TrafficProfile,
    pub duration: f64,
    pub tick: f64,
    pub backlog_capacity: usize,
    pub reject_timeout: f64,
    pub latency: (f64, f64),
    pub reservoir_size: usize,
    pub feature_discount: f64,
    pub reward: FairnessKind,
    pub log_epsilon: f64,
    pub capacity_changes: Vec<CapacityChange>,
    /// Keep processing after the episode end until every task has finished.
    pub drain: bool,
    pub record_observations: bool,
}

impl SimConfig {
    pub fn new(servers: Vec<ServerSpec>, agents: usize, traffic: TrafficProfile, duration: f64) -> Self {
        Self {
            servers,
            agents,
            traffic,
            duration,
            tick: DEFAULT_TICK,
            backlog_capacity: DEFAULT_BACKLOG_CAPACITY,
            reject_timeout: DEFAULT_REJECT_TIMEOUT,
            latency: DEFAULT_LATENCY_RANGE,
            reservoir_size: DEFAULT_RESERVOIR_SIZE,
            feature_discount: DEFAULT_FEATURE_DISCOUNT,
            reward: FairnessKind::Vbf,
            log_epsilon: lbgame_core::DEFAULT_LOG_EPSILON,
            capacity_changes: Vec::new(),
            drain: true,
            record_observations: false,
        }
    }

    pub fn schedule_capacity_change(&mut self, server: usize, time: f64, cpu_factor: f64) -> Result<(), SimError> {
        let change = CapacityChange { server, time, cpu_factor };
        self.check_change(&change)?;
        self.capacity_changes.push(change);
        Ok(())
    }

    fn check_change(&self, c: &CapacityChange) -> Result<(), SimError> {
        if c.server >= self.servers.len() {
            return Err(SimError::Config(format!("capacity change on unknown server {}", c.server)));
        }
        if !(c.time >= 0.0 && c.time <= self.duration) {
            return Err(SimError::Config(format!("capacity change time {} outside episode", c.time)));
        }
        if !(c.cpu_factor.is_finite() && c.cpu_factor > 0.0) {
            return Err(SimError::Config(format!("capacity factor must be positive, got {}", c.cpu_factor)));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.servers.is_empty() {
            return Err(SimError::Config("no servers".into()));
        }
        for (j, s) in self.servers.iter().enumerate() {
            s.validate().map_err(|e| SimError::Config(e.to_string()))?;
            if s.id != j {
                return Err(SimError::Config(format!("server at position {j} has id {}", s.id)));
            }
        }
        if self.agents == 0 {
            return Err(SimError::Config("need at least one agent".into()));
        }
        self.traffic.validate().map_err(SimError::Config)?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SimError::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.tick.is_finite() && self.tick > 0.0) {
            return Err(SimError::Config(format!("tick must be positive, got {}", self.tick)));
        }
        if !(self.latency.0 >= 0.0 && self.latency.1 >= self.latency.0 && self.latency.1.is_finite()) {
            return Err(SimError::Config(format!("bad latency range {:?}", self.latency)));
        }
        if self.reservoir_size == 0 {
            return Err(SimError::Config("reservoir size must be positive".into()));
        }
        if !(self.feature_discount > 0.0 && self.feature_discount <= 1.0) {
            return Err(SimError::Config("feature discount must be in (0, 1]".into()));
        }
        if !(self.reject_timeout > 0.0) {
            return Err(SimError::Config("reject timeout must be positive".into()));
        }
        for c in &self.capacity_changes {
            self.check_change(c)?;
        }
        if self.traffic.cpu_utilisation(&self.servers) > 1.0 {
            log::warn!(
                "offered CPU load {:.3} exceeds nominal capacity",
                self.traffic.cpu_utilisation(&self.servers)
            );
        }
        Ok(())
    }

    /// Decision ticks strictly inside the episode; a terminal tick follows.
    pub fn horizon(&self) -> usize {
        let h = (self.duration / self.tick).ceil() as usize;
        if (h as f64) * self.tick >= self.duration - 1e-12 * self.duration {
            h
        } else {
            h + 1
        }
    }

    pub fn nominal_weights(&self) -> Vec<f64> {
        self.servers.iter().map(ServerSpec::nominal_capacity).collect()
    }

    pub fn observation_scales(&self) -> ObservationScales {
        ObservationScales {
            count: self.servers.iter().map(|s| 1.0 / f64::from(s.cpu_cap)).collect(),
            time: self.traffic.mean_work(),
            discount: self.feature_discount,
        }
    }

    pub fn observation_dim(&self) -> usize {
        FeatureVector::dimension(self.servers.len())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("policy error: {0}")]
    Policy(#[from] PolicyError),
    #[error("observation error: {0}")]
    Observation(#[from] ObservationError),
    #[error("reward error: {0}")]
    Reward(#[from] lbgame_core::CoreError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Response {
    Duration,
    Completed,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EventKind {
    CapacityChange { server: usize, factor: f64 },
    StageComplete { server: usize, queue: QueueKind, version: u64 },
    Response { task: TaskId, what: Response },
    ArrivalAtServer { task: TaskId },
    DecisionTick { index: usize, terminal: bool },
    ArrivalAtAgent { task: TaskId },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::CapacityChange { .. } => 0,
            EventKind::StageComplete { .. } => 1,
            EventKind::Response { .. } => 2,
            EventKind::ArrivalAtServer { .. } => 3,
            EventKind::DecisionTick { .. } => 4,
            EventKind::ArrivalAtAgent { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.rank.cmp(&self.rank))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone)]
struct TaskRuntime {
    stage: usize,
    residual: f64,
    served: f64,
    lat_back: f64,
}

struct AgentRuntime {
    local: AgentLocalState,
    action: Action<f64>,
    channels: AgentChannels,
    policy_rng: SimRng,
    latency_rng: SimRng,
    reservoir_rng: SimRng,
    last_arrival: Option<f64>,
    reward_input: Vec<f64>,
}

/// Per-server remaining time to process. With `extra`, entry `j` is the
/// time the extra task would need to finish if placed on server `j`
/// (infinite when server `j` would reject it).
pub fn remaining_time_vector(servers: &[ServerSnapshot], extra: Option<&[Stage]>) -> Vec<f64> {
    servers
        .iter()
        .map(|s| match extra {
            None => s.drain_time(),
            Some(stages) => {
                let mut s = s.clone();
                if s.admit_marked(stages) {
                    s.project().1
                } else {
                    f64::INFINITY
                }
            }
        })
        .collect()
}

struct World<'c> {
    cfg: &'c SimConfig,
    choices: Vec<PolicyKind>,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Event>,
    servers: Vec<ServerRuntime>,
    tasks: Vec<TaskRecord>,
    rt: Vec<TaskRuntime>,
    agents: Vec<AgentRuntime>,
    counts: Counts,
    scales: ObservationScales,
    trace_ticks: Vec<TickSnapshot>,
    steps: Vec<Vec<AgentStep>>,
    conservation_failures: usize,
    max_work_error: f64,
    max_cpu_active: Vec<usize>,
    max_backlog: Vec<usize>,
    resident: [f64; 3],
    last_resident_t: f64,
}

impl<'c> World<'c> {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.seq += 1;
        self.queue.push(Event {
            time,
            rank: kind.rank(),
            seq: self.seq,
            kind,
        });
    }

    /// Residual work of `id` projected to the current time.
    fn residual_now(&self, id: TaskId, elapsed_work: f64) -> f64 {
        (self.rt[id].residual - elapsed_work).max(0.0)
    }

    fn snapshot(&self, j: usize) -> ServerSnapshot {
        let s = &self.servers[j];
        let cpu_done = s.cpu_task_speed() * (self.now - s.cpu_clock);
        let io_done = s.io_task_speed() * (self.now - s.io_clock);
        let job = |id: &TaskId, done: f64| {
            let r = &self.rt[*id];
            PendingJob::new(self.residual_now(*id, done), self.tasks[*id].stages[r.stage + 1..].to_vec())
        };
        ServerSnapshot {
            spec: s.spec.clone(),
            cpu_factor: s.cpu_factor,
            backlog_capacity: s.backlog_capacity,
            cpu: s.cpu_active.iter().map(|id| job(id, cpu_done)).collect(),
            backlog: s.cpu_backlog.iter().map(|id| job(id, 0.0)).collect(),
            io: s.io_active.iter().map(|id| job(id, io_done)).collect(),
        }
    }

    fn advance(&mut self, j: usize, kind: QueueKind) {
        let now = self.now;
        let s = &mut self.servers[j];
        let cpu_speed = s.cpu_task_speed();
        let io_speed = s.io_task_speed();
        let (clock, speed, members) = match kind {
            QueueKind::Cpu => (&mut s.cpu_clock, cpu_speed, &s.cpu_active),
            QueueKind::Io => (&mut s.io_clock, io_speed, &s.io_active),
        };
        let dt = now - *clock;
        if dt > 0.0 {
            for &id in members {
                let r = &mut self.rt[id];
                r.residual -= speed * dt;
                r.served += speed * dt;
            }
        }
        *clock = now;
    }

    fn reproject(&mut self, j: usize, kind: QueueKind) {
        let s = &mut self.servers[j];
        let (version, speed, members) = match kind {
            QueueKind::Cpu => {
                s.cpu_version += 1;
                (s.cpu_version, s.cpu_task_speed(), &s.cpu_active)
            }
            QueueKind::Io => {
                s.io_version += 1;
                (s.io_version, s.io_task_speed(), &s.io_active)
            }
        };
        let Some(min_residual) = members.iter().map(|&id| self.rt[id].residual).min_by(f64::total_cmp) else {
            return;
        };
        let dt = min_residual.max(0.0) / speed;
        let at = self.now + dt;
        self.push(at, EventKind::StageComplete { server: j, queue: kind, version });
    }

    fn update_resident(&mut self) {
        let dt = self.now - self.last_resident_t;
        if dt > 0.0 && self.last_resident_t < self.cfg.duration {
            let third = ((self.last_resident_t / self.cfg.duration) * 3.0).floor().min(2.0) as usize;
            let n: usize = self.servers.iter().map(ServerRuntime::task_count).sum();
            self.resident[third] += n as f64 * dt.min(self.cfg.duration - self.last_resident_t);
        }
        self.last_resident_t = self.now;
    }

    fn start_service(&mut self, id: TaskId) {
        if self.tasks[id].t_first_service.is_none() {
            self.tasks[id].t_first_service = Some(self.now);
            let at = self.now + self.rt[id].lat_back;
            self.push(at, EventKind::Response { task: id, what: Response::Duration });
        }
    }

    fn on_arrival_at_agent(&mut self, id: TaskId) -> Result<(), SimError> {
        let i = self.tasks[id].agent;
        let now = self.now;
        self.counts.arrivals += 1;
        self.counts.in_transit += 1;
        {
            let a = &mut self.agents[i];
            if let Some(prev) = a.last_arrival {
                a.channels.inter_arrival.insert(now, now - prev, &mut a.reservoir_rng);
            }
            a.last_arrival = Some(now);
        }
        let n = self.servers.len();
        let j = match self.choices[i] {
            PolicyKind::Ecmp => ecmp_assign(n, &mut self.agents[i].policy_rng),
            PolicyKind::Wcmp => {
                let a = &mut self.agents[i];
                wcmp_assign(&a.local.weights, &mut a.policy_rng)?
            }
            PolicyKind::Lsq => lsq_assign(&self.agents[i].local),
            PolicyKind::Sed => sed_assign(&self.agents[i].local)?,
            PolicyKind::Rl => rl_assign(&self.agents[i].local, &self.agents[i].action)?,
            PolicyKind::Oracle => {
                let stages = self.tasks[id].stages.clone();
                let view = OracleView {
                    servers: (0..n).map(|j| self.snapshot(j)).collect(),
                    task: &stages,
                };
                oracle_assign(&view)
            }
        };
        self.agents[i].local.record_assignment(j);
        let a = &mut self.agents[i];
        let lat_to = sample_latency(&mut a.latency_rng, self.cfg.latency);
        let lat_back = sample_latency(&mut a.latency_rng, self.cfg.latency);
        self.rt[id].lat_back = lat_back;
        let t = &mut self.tasks[id];
        t.assigned_server = Some(j);
        t.t_assigned = Some(now);
        self.push(now + lat_to, EventKind::ArrivalAtServer { task: id });
        Ok(())
    }

    fn on_arrival_at_server(&mut self, id: TaskId) {
        let j = self.tasks[id].assigned_server.expect("assigned");
        let first = self.tasks[id].stages[0].kind;
        self.counts.in_transit -= 1;
        self.update_resident();
        self.advance(j, first);
        match admit_or_reject(&mut self.servers[j], id, first) {
            Admission::Active => {
                self.tasks[id].status = TaskStatus::InService;
                self.counts.in_service += 1;
                self.start_service(id);
                self.reproject(j, first);
            }
            Admission::Backlog => {
                self.tasks[id].status = TaskStatus::InService;
                self.counts.backlogged += 1;
            }
            Admission::Rejected => {
                let t = &mut self.tasks[id];
                t.status = TaskStatus::Rejected;
                t.t_completed = Some(t.arrival_time + self.cfg.reject_timeout);
                self.counts.rejected += 1;
                let at = self.now + self.rt[id].lat_back;
                self.push(at, EventKind::Response { task: id, what: Response::Rejected });
            }
        }
        let s = &self.servers[j];
        self.max_cpu_active[j] = self.max_cpu_active[j].max(s.cpu_active.len());
        self.max_backlog[j] = self.max_backlog[j].max(s.cpu_backlog.len());
    }

    fn on_stage_complete(&mut self, j: usize, kind: QueueKind, version: u64) {
        let current = match kind {
            QueueKind::Cpu => self.servers[j].cpu_version,
            QueueKind::Io => self.servers[j].io_version,
        };
        if version != current {
            return;
        }
        self.update_resident();
        self.advance(j, kind);
        let members = match kind {
            QueueKind::Cpu => &self.servers[j].cpu_active,
            QueueKind::Io => &self.servers[j].io_active,
        };
        let (pos, id) = members
            .iter()
            .enumerate()
            .min_by(|a, b| self.rt[*a.1].residual.total_cmp(&self.rt[*b.1].residual))
            .map(|(p, &id)| (p, id))
            .expect("stage completion on empty queue");
        match kind {
            QueueKind::Cpu => self.servers[j].cpu_active.remove(pos),
            QueueKind::Io => self.servers[j].io_active.remove(pos),
        };
        let work = self.tasks[id].stages[self.rt[id].stage].work;
        let r = &mut self.rt[id];
        r.served += r.residual;
        let err = (r.served - work).abs() / work;
        self.max_work_error = self.max_work_error.max(err);
        r.residual = 0.0;

        if r.stage + 1 < self.tasks[id].stages.len() {
            r.stage += 1;
            let next = self.tasks[id].stages[r.stage];
            r.residual = next.work;
            r.served = 0.0;
            if next.kind != kind {
                self.advance(j, next.kind);
            }
            let s = &mut self.servers[j];
            match next.kind {
                QueueKind::Io => s.io_active.push(id),
                QueueKind::Cpu => {
                    if s.cpu_has_slot() {
                        s.cpu_active.push(id)
                    } else {
                        s.cpu_backlog.push_back(id);
                        self.counts.in_service -= 1;
                        self.counts.backlogged += 1;
                    }
                }
            }
            if next.kind != kind {
                self.reproject(j, next.kind);
            }
        } else {
            self.tasks[id].t_server_done = Some(self.now);
            self.counts.in_service -= 1;
            self.counts.returning += 1;
            let at = self.now + self.rt[id].lat_back;
            self.push(at, EventKind::Response { task: id, what: Response::Completed });
        }
        if kind == QueueKind::Cpu {
            while self.servers[j].cpu_has_slot() {
                let Some(next) = self.servers[j].cpu_backlog.pop_front() else { break };
                self.servers[j].cpu_active.push(next);
                self.counts.backlogged -= 1;
                self.counts.in_service += 1;
                self.start_service(next);
            }
            let a = self.servers[j].cpu_active.len();
            self.max_cpu_active[j] = self.max_cpu_active[j].max(a);
        }
        self.reproject(j, kind);
    }

    fn on_response(&mut self, id: TaskId, what: Response) {
        let now = self.now;
        let t = &self.tasks[id];
        let (i, j) = (t.agent, t.assigned_server.expect("assigned"));
        let (assigned, arrival) = (t.t_assigned.expect("assigned"), t.arrival_time);
        let timeout = self.cfg.reject_timeout;
        let a = &mut self.agents[i];
        match what {
            Response::Duration => {
                a.channels.duration[j].insert(now, now - assigned, &mut a.reservoir_rng);
            }
            Response::Completed => {
                a.local.q[j] -= 1;
                a.channels.completion[j].insert(now, now - arrival, &mut a.reservoir_rng);
                let t = &mut self.tasks[id];
                t.t_completed = Some(now);
                t.status = TaskStatus::Completed;
                self.counts.returning -= 1;
                self.counts.completed += 1;
            }
            Response::Rejected => {
                a.local.q[j] -= 1;
                a.channels.completion[j].insert(now, timeout, &mut a.reservoir_rng);
            }
        }
    }

    fn on_capacity_change(&mut self, j: usize, factor: f64) {
        if factor == self.servers[j].cpu_factor {
            return;
        }
        self.advance(j, QueueKind::Cpu);
        self.servers[j].cpu_factor = factor;
        self.reproject(j, QueueKind::Cpu);
    }

    fn audit(&mut self) {
        let mut c = Counts {
            arrivals: self.counts.arrivals,
            ..Counts::default()
        };
        for s in &self.servers {
            c.in_service += s.cpu_active.len() + s.io_active.len();
            c.backlogged += s.cpu_backlog.len();
        }
        let mut pending = 0;
        let mut resident_or_returning = 0;
        for t in &self.tasks {
            match t.status {
                TaskStatus::Pending if t.t_assigned.is_some() => pending += 1,
                TaskStatus::Pending => {}
                TaskStatus::InService => resident_or_returning += 1,
                TaskStatus::Completed => c.completed += 1,
                TaskStatus::Rejected => c.rejected += 1,
            }
        }
        c.in_transit = pending;
        c.returning = resident_or_returning - c.in_service - c.backlogged;
        if !c.conserved() || c != self.counts {
            self.conservation_failures += 1;
        }
    }

    fn on_tick(&mut self, index: usize, terminal: bool, policies: &mut [AgentPolicy<'_>]) -> Result<(), SimError> {
        self.update_resident();
        self.audit();
        let n = self.servers.len();
        let m = self.agents.len();
        let snaps: Vec<ServerSnapshot> = (0..n).map(|j| self.snapshot(j)).collect();
        let loads = LoadVector::new(remaining_time_vector(&snaps, None))?;
        let mut rows = vec![vec![0.0; n]; m];
        for (j, s) in self.servers.iter().enumerate() {
            let mut share = vec![0.0; m];
            let snap = &snaps[j];
            let ids = s.cpu_active.iter().chain(&s.cpu_backlog).chain(&s.io_active);
            let jobs = snap.cpu.iter().chain(&snap.backlog).chain(&snap.io);
            for (&id, job) in ids.zip(jobs) {
                share[self.tasks[id].agent] += job.outstanding_work();
            }
            let total: f64 = share.iter().sum();
            if total > 0.0 {
                for i in 0..m {
                    rows[i][j] = loads.as_slice()[j] * share[i] / total;
                }
            }
        }
        self.trace_ticks.push(TickSnapshot {
            index,
            time: self.now,
            loads,
            per_agent: PerAgentLoadMatrix::new(rows)?,
            counts: self.counts,
        });

        for i in 0..m {
            let now = self.now;
            let discount = self.cfg.feature_discount;
            let a = &mut self.agents[i];
            for j in 0..n {
                let buf = &a.channels.duration[j];
                if !buf.is_empty() {
                    a.reward_input[j] = reduce_stats(&buf.samples(), now, discount)[3];
                }
            }
            let r = if index == 0 {
                0.0
            } else {
                reward(self.cfg.reward, &a.reward_input, self.cfg.log_epsilon)?
            };
            let is_rl = matches!(policies[i], AgentPolicy::Rl(_));
            let observation = if is_rl || self.cfg.record_observations {
                Some(build_observation(&a.channels, &a.local.q, now, a.action.weights(), &self.scales)?)
            } else {
                None
            };
            if let AgentPolicy::Rl(source) = &mut policies[i] {
                let ctx = TickContext {
                    agent: i,
                    tick: index,
                    time: now,
                    observation: observation.as_ref().expect("built for rl"),
                    reward: r,
                    terminal,
                };
                let action = source.act(&ctx);
                if action.len() != n {
                    return Err(SimError::Policy(PolicyError::Length(action.len(), n)));
                }
                if !terminal {
                    a.action = action;
                }
            }
            self.steps[i].push(AgentStep {
                tick: index,
                time: now,
                reward: r,
                action: a.action.weights().to_vec(),
                q: a.local.q.clone(),
                reward_input: a.reward_input.clone(),
                observation: observation.filter(|_| self.cfg.record_observations).map(|o| o.values),
            });
        }
        Ok(())
    }
}


pub fn run_episode(config: &SimConfig, policies: &mut [AgentPolicy<'_>], seed: u64) -> Result<SimTrace, SimError> {
    config.validate()?;
    let arrivals = generate_arrivals(&config.traffic, config.duration, config.agents, seed);
    run_episode_with_arrivals(config, policies, seed, arrivals)
}

/// Runs one episode over pre-generated arrivals (one stream per agent).
pub fn run_episode_with_arrivals(
    config: &SimConfig,
    policies: &mut [AgentPolicy<'_>],
    seed: u64,
    arrivals: Vec<Vec<ArrivalSpec>>,
) -> Result<SimTrace, SimError> {
    config.validate()?;
    if policies.len() != config.agents || arrivals.len() != config.agents {
        return Err(SimError::Config(format!(
            "{} agents but {} policies and {} arrival streams",
            config.agents,
            policies.len(),
            arrivals.len()
        )));
    }
    let n = config.servers.len();
    let nominal = config.nominal_weights();
    let mut agents = Vec::with_capacity(config.agents);
    for (i, p) in policies.iter().enumerate() {
        let weights = match p {
            AgentPolicy::Wcmp(w) | AgentPolicy::Sed(w) => w.clone(),
            _ => nominal.clone(),
        };
        if weights.len() != n {
            return Err(SimError::Policy(PolicyError::Length(weights.len(), n)));
        }
        agents.push(AgentRuntime {
            local: AgentLocalState::new(vec![0; n], weights)?,
            action: Action::uniform(i, n)?,
            channels: AgentChannels::new(n, config.reservoir_size),
            policy_rng: stream(seed, "policy", i as u64),
            latency_rng: stream(seed, "latency", i as u64),
            reservoir_rng: stream(seed, "reservoir", i as u64),
            last_arrival: None,
            reward_input: vec![0.0; n],
        });
    }
    let mut world = World {
        cfg: config,
        choices: policies.iter().map(AgentPolicy::kind).collect(),
        now: 0.0,
        seq: 0,
        queue: BinaryHeap::new(),
        servers: config
            .servers
            .iter()
            .map(|s| ServerRuntime::new(s.clone(), config.backlog_capacity))
            .collect(),
        tasks: Vec::new(),
        rt: Vec::new(),
        agents,
        counts: Counts::default(),
        scales: config.observation_scales(),
        trace_ticks: Vec::new(),
        steps: vec![Vec::new(); config.agents],
        conservation_failures: 0,
        max_work_error: 0.0,
        max_cpu_active: vec![0; n],
        max_backlog: vec![0; n],
        resident: [0.0; 3],
        last_resident_t: 0.0,
    };

    let mut ordered: Vec<(f64, usize, ArrivalSpec)> = arrivals
        .into_iter()
        .enumerate()
        .flat_map(|(i, stream)| stream.into_iter().map(move |a| (a.time, i, a)))
        .filter(|(t, _, _)| *t >= 0.0 && *t < config.duration)
        .collect();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (id, (time, agent, spec)) in ordered.into_iter().enumerate() {
        if spec.stages.is_empty() || spec.stages.iter().any(|s| !(s.work > 0.0 && s.work.is_finite())) {
            return Err(SimError::Config(format!("task {id} has an empty or nonpositive stage list")));
        }
        world.rt.push(TaskRuntime {
            stage: 0,
            residual: spec.stages[0].work,
            served: 0.0,
            lat_back: 0.0,
        });
        world.tasks.push(TaskRecord {
            id,
            agent,
            arrival_time: time,
            stages: spec.stages,
            assigned_server: None,
            t_assigned: None,
            t_first_service: None,
            t_server_done: None,
            t_completed: None,
            status: TaskStatus::Pending,
        });
        world.push(time, EventKind::ArrivalAtAgent { task: id });
    }
    for c in &config.capacity_changes {
        world.push(c.time, EventKind::CapacityChange { server: c.server, factor: c.cpu_factor });
    }
    let horizon = config.horizon();
    for k in 0..horizon {
        let t = (k as f64 * config.tick).min(config.duration);
        world.push(t, EventKind::DecisionTick { index: k, terminal: false });
    }
    world.push(config.duration, EventKind::DecisionTick { index: horizon, terminal: true });

    let mut end_counts = None;
    while let Some(ev) = world.queue.pop() {
        if end_counts.is_some() && !config.drain {
            break;
        }
        world.now = ev.time;
        match ev.kind {
            EventKind::CapacityChange { server, factor } => world.on_capacity_change(server, factor),
            EventKind::StageComplete { server, queue, version } => world.on_stage_complete(server, queue, version),
            EventKind::Response { task, what } => world.on_response(task, what),
            EventKind::ArrivalAtServer { task } => world.on_arrival_at_server(task),
            EventKind::ArrivalAtAgent { task } => world.on_arrival_at_agent(task)?,
            EventKind::DecisionTick { index, terminal } => {
                world.on_tick(index, terminal, policies)?;
                if terminal {
                    end_counts = Some(world.counts);
                }
            }
        }
    }
    world.audit();
    let duration = config.duration;
    let third = duration / 3.0;
    Ok(SimTrace {
        seed,
        servers: n,
        duration,
        reject_timeout: config.reject_timeout,
        ticks: world.trace_ticks,
        tasks: world.tasks,
        agent_steps: world.steps,
        end_counts: end_counts.unwrap_or(world.counts),
        final_counts: world.counts,
        conservation_failures: world.conservation_failures,
        max_stage_work_error: world.max_work_error,
        max_cpu_active: world.max_cpu_active,
        max_backlog: world.max_backlog,
        resident_by_third: world.resident.map(|r| r / third),
    })
}
