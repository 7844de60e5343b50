use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lbgame_core::{fairness, LoadVector, PerAgentLoadMatrix};

use crate::traffic::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    InService,
    Completed,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: usize,
    pub agent: usize,
    pub arrival_time: f64,
    pub stages: Vec<Stage>,
    pub assigned_server: Option<usize>,
    pub t_assigned: Option<f64>,
    pub t_first_service: Option<f64>,
    /// Last stage finished at the server, before the return hop.
    pub t_server_done: Option<f64>,
    /// Response observed by the agent; for rejections, arrival plus the timeout.
    pub t_completed: Option<f64>,
    pub status: TaskStatus,
}

impl TaskRecord {
    /// Completion time seen by the client, if the task has finished.
    pub fn fct(&self) -> Option<f64> {
        match self.status {
            TaskStatus::Completed | TaskStatus::Rejected => {
                self.t_completed.map(|t| t - self.arrival_time)
            }
            _ => None,
        }
    }

    pub fn total_work(&self) -> f64 {
        self.stages.iter().map(|s| s.work).sum()
    }
}

/// Population counts used by the conservation audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub arrivals: usize,
    pub in_transit: usize,
    pub in_service: usize,
    pub backlogged: usize,
    pub returning: usize,
    pub completed: usize,
    pub rejected: usize,
}

impl Counts {
    pub fn in_flight(&self) -> usize {
        self.in_transit + self.in_service + self.backlogged + self.returning
    }

    pub fn conserved(&self) -> bool {
        self.arrivals == self.completed + self.in_flight() + self.rejected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickSnapshot {
    pub index: usize,
    pub time: f64,
    pub loads: LoadVector<f64>,
    pub per_agent: PerAgentLoadMatrix<f64>,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub tick: usize,
    pub time: f64,
    pub reward: f64,
    /// Weights in force after this tick.
    pub action: Vec<f64>,
    pub q: Vec<u32>,
    /// Per-server discounted-average durations the reward was computed from.
    pub reward_input: Vec<f64>,
    pub observation: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub seed: u64,
    pub servers: usize,
    pub duration: f64,
    pub reject_timeout: f64,
    pub ticks: Vec<TickSnapshot>,
    pub tasks: Vec<TaskRecord>,
    pub agent_steps: Vec<Vec<AgentStep>>,
    pub end_counts: Counts,
    pub final_counts: Counts,
    pub conservation_failures: usize,
    pub max_stage_work_error: f64,
    pub max_cpu_active: Vec<usize>,
    pub max_backlog: Vec<usize>,
    /// Time-average number of tasks resident on servers per third of the episode.
    pub resident_by_third: [f64; 3],
}

impl SimTrace {
    /// FCT of every finished task; rejections count as the timeout.
    pub fn fct_values(&self) -> Vec<f64> {
        self.tasks
            .iter()
            .filter_map(|t| match t.status {
                TaskStatus::Rejected => Some(self.reject_timeout),
                _ => t.fct(),
            })
            .collect()
    }

    pub fn mean_fct(&self) -> Option<f64> {
        let v = self.fct_values();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn rejected(&self) -> usize {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Rejected).count()
    }

    pub fn load_trajectory(&self) -> Vec<LoadVector<f64>> {
        self.ticks.iter().map(|t| t.loads.clone()).collect()
    }

    pub fn potential(&self) -> f64 {
        self.ticks.iter().map(|t| fairness::vbf(&t.loads)).sum()
    }

    /// Largest per-server remaining time seen at any tick.
    pub fn makespan(&self) -> f64 {
        self.ticks
            .iter()
            .map(|t| t.loads.as_slice().iter().copied().fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    pub fn mean_vbf(&self) -> f64 {
        mean(self.ticks.iter().map(|t| fairness::vbf(&t.loads)))
    }

    pub fn mean_pbf(&self) -> f64 {
        mean(self.ticks.iter().map(|t| fairness::pbf(&t.loads)))
    }

    /// Sum of per-step rewards of one agent, skipping the initial tick.
    pub fn episode_reward(&self, agent: usize) -> f64 {
        self.agent_steps[agent].iter().skip(1).map(|s| s.reward).sum()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut f = |x: f64| h.update(x.to_bits().to_le_bytes());
        f(self.seed as f64);
        for t in &self.ticks {
            f(t.time);
            t.loads.as_slice().iter().for_each(|&x| f(x));
        }
        for t in &self.tasks {
            f(t.arrival_time);
            f(t.assigned_server.map_or(-1.0, |s| s as f64));
            f(t.t_first_service.unwrap_or(-1.0));
            f(t.t_completed.unwrap_or(-1.0));
            f(t.status as u8 as f64);
        }
        for steps in &self.agent_steps {
            for s in steps {
                f(s.reward);
                s.action.iter().for_each(|&x| f(x));
            }
        }
        hex::encode(h.finalize())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
