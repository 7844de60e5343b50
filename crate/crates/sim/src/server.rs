use std::collections::VecDeque;

use lbgame_core::ServerSpec;

use crate::traffic::{QueueKind, Stage};

pub type TaskId = usize;

pub const DEFAULT_BACKLOG_CAPACITY: usize = 64;
pub const DEFAULT_REJECT_TIMEOUT: f64 = 40.0;

/// Per-task CPU speed under blocked processor sharing, in `[0, 1]`.
pub fn cpu_speed_per_task(active_count: usize, p: u32, p_hat: u32) -> f64 {
    let p = p as usize;
    if active_count <= p {
        1.0
    } else {
        p as f64 / active_count.min(p_hat as usize) as f64
    }
}

/// Processor-sharing IO speed. Returns 0 for an empty queue.
pub fn io_speed_per_task(active_count: usize) -> f64 {
    if active_count == 0 {
        0.0
    } else {
        1.0 / active_count as f64
    }
}

/// A backend's queue state. Residual work of each task lives with the engine.
#[derive(Debug, Clone)]
pub struct ServerRuntime {
    pub spec: ServerSpec,
    pub backlog_capacity: usize,
    pub cpu_factor: f64,
    pub cpu_active: Vec<TaskId>,
    pub cpu_backlog: VecDeque<TaskId>,
    pub io_active: Vec<TaskId>,
    pub(crate) cpu_clock: f64,
    pub(crate) io_clock: f64,
    pub(crate) cpu_version: u64,
    pub(crate) io_version: u64,
}

impl ServerRuntime {
    pub fn new(spec: ServerSpec, backlog_capacity: usize) -> Self {
        Self {
            spec,
            backlog_capacity,
            cpu_factor: 1.0,
            cpu_active: Vec::new(),
            cpu_backlog: VecDeque::new(),
            io_active: Vec::new(),
            cpu_clock: 0.0,
            io_clock: 0.0,
            cpu_version: 0,
            io_version: 0,
        }
    }

    /// Work units per second received by each active CPU task.
    pub fn cpu_task_speed(&self) -> f64 {
        cpu_speed_per_task(self.cpu_active.len(), self.spec.cpu_count, self.spec.cpu_cap)
            * self.spec.processing_rate
            * self.cpu_factor
    }

    pub fn io_task_speed(&self) -> f64 {
        io_speed_per_task(self.io_active.len())
    }

    pub fn cpu_has_slot(&self) -> bool {
        self.cpu_active.len() < self.spec.cpu_cap as usize
    }

    pub fn task_count(&self) -> usize {
        self.cpu_active.len() + self.cpu_backlog.len() + self.io_active.len()
    }

    pub fn is_idle(&self) -> bool {
        self.task_count() == 0
    }
}

/// Total CPU work units per second currently delivered by the server.
pub fn server_aggregate_speed(runtime: &ServerRuntime) -> f64 {
    runtime.cpu_task_speed() * runtime.cpu_active.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Active,
    Backlog,
    Rejected,
}

/// Admission of a newly arrived task whose first stage is `first`.
pub fn admit_or_reject(runtime: &mut ServerRuntime, task: TaskId, first: QueueKind) -> Admission {
    match first {
        QueueKind::Io => {
            runtime.io_active.push(task);
            Admission::Active
        }
        QueueKind::Cpu => {
            if runtime.cpu_has_slot() {
                runtime.cpu_active.push(task);
                Admission::Active
            } else if runtime.cpu_backlog.len() < runtime.backlog_capacity {
                runtime.cpu_backlog.push_back(task);
                Admission::Backlog
            } else {
                Admission::Rejected
            }
        }
    }
}

/// A task's outstanding work on a server: residual of its current stage
/// plus the untouched stages that follow.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingJob {
    pub residual: f64,
    pub rest: Vec<Stage>,
    pub marked: bool,
}

impl PendingJob {
    pub fn new(residual: f64, rest: Vec<Stage>) -> Self {
        Self {
            residual,
            rest,
            marked: false,
        }
    }

    pub fn outstanding_work(&self) -> f64 {
        self.residual + self.rest.iter().map(|s| s.work).sum::<f64>()
    }
}

/// Detached copy of a server used to project its future without arrivals.
#[derive(Debug, Clone)]
pub struct ServerSnapshot {
    pub spec: ServerSpec,
    pub cpu_factor: f64,
    pub backlog_capacity: usize,
    pub cpu: Vec<PendingJob>,
    pub backlog: VecDeque<PendingJob>,
    pub io: Vec<PendingJob>,
}

impl ServerSnapshot {
    pub fn idle(spec: ServerSpec, backlog_capacity: usize) -> Self {
        Self {
            spec,
            cpu_factor: 1.0,
            backlog_capacity,
            cpu: Vec::new(),
            backlog: VecDeque::new(),
            io: Vec::new(),
        }
    }

    /// Places a task as a new arrival would be. Returns false on rejection.
    pub fn admit(&mut self, stages: &[Stage]) -> bool {
        self.place(stages, false)
    }

    /// Like [`admit`](Self::admit), and [`project`](Self::project) reports
    /// when this task finishes.
    pub fn admit_marked(&mut self, stages: &[Stage]) -> bool {
        self.place(stages, true)
    }

    fn place(&mut self, stages: &[Stage], marked: bool) -> bool {
        let job = PendingJob {
            residual: stages[0].work,
            rest: stages[1..].to_vec(),
            marked,
        };
        match stages[0].kind {
            QueueKind::Io => self.io.push(job),
            QueueKind::Cpu => {
                if self.cpu.len() < self.spec.cpu_cap as usize {
                    self.cpu.push(job)
                } else if self.backlog.len() < self.backlog_capacity {
                    self.backlog.push_back(job)
                } else {
                    return false;
                }
            }
        }
        true
    }

    fn cpu_speed(&self) -> f64 {
        cpu_speed_per_task(self.cpu.len(), self.spec.cpu_count, self.spec.cpu_cap)
            * self.spec.processing_rate
            * self.cpu_factor
    }

    /// Time until every resident task has finished, if nothing else arrives.
    pub fn drain_time(&self) -> f64 {
        self.project().0
    }

    /// `(drain time, finish time of the marked task)`; the second entry is
    /// infinite when no task is marked.
    pub fn project(&self) -> (f64, f64) {
        let mut s = self.clone();
        let mut t = 0.0;
        let mut marked_done = f64::INFINITY;
        loop {
            while s.cpu.len() < s.spec.cpu_cap as usize {
                match s.backlog.pop_front() {
                    Some(j) => s.cpu.push(j),
                    None => break,
                }
            }
            if s.cpu.is_empty() && s.io.is_empty() {
                return (t, marked_done);
            }
            let cs = s.cpu_speed();
            let is = io_speed_per_task(s.io.len());
            let mut best: Option<(f64, QueueKind, usize)> = None;
            for (i, j) in s.cpu.iter().enumerate() {
                let dt = j.residual / cs;
                if best.map_or(true, |b| dt < b.0) {
                    best = Some((dt, QueueKind::Cpu, i));
                }
            }
            for (i, j) in s.io.iter().enumerate() {
                let dt = j.residual / is;
                if best.map_or(true, |b| dt < b.0) {
                    best = Some((dt, QueueKind::Io, i));
                }
            }
            let (dt, kind, idx) = best.expect("nonempty");
            if !dt.is_finite() {
                return (f64::INFINITY, marked_done);
            }
            t += dt;
            for j in &mut s.cpu {
                j.residual = (j.residual - cs * dt).max(0.0);
            }
            for j in &mut s.io {
                j.residual = (j.residual - is * dt).max(0.0);
            }
            let mut done = match kind {
                QueueKind::Cpu => s.cpu.remove(idx),
                QueueKind::Io => s.io.remove(idx),
            };
            if done.rest.is_empty() {
                if done.marked {
                    marked_done = t;
                }
                continue;
            }
            let next = done.rest.remove(0);
            done.residual = next.work;
            match next.kind {
                QueueKind::Io => s.io.push(done),
                QueueKind::Cpu => {
                    if s.cpu.len() < s.spec.cpu_cap as usize {
                        s.cpu.push(done)
                    } else {
                        s.backlog.push_back(done)
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: u32, cap: u32) -> ServerSpec {
        ServerSpec::new(0, 1.0, p, cap).unwrap()
    }

    #[test]
    fn cpu_speed_examples() {
        assert_eq!(cpu_speed_per_task(1, 2, 4), 1.0);
        assert!((cpu_speed_per_task(3, 2, 4) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cpu_speed_per_task(6, 2, 4), 0.5);
        assert_eq!(cpu_speed_per_task(0, 1, 1), 1.0);
    }

    #[test]
    fn io_speed_examples() {
        assert_eq!(io_speed_per_task(1), 1.0);
        assert_eq!(io_speed_per_task(4), 0.25);
        for n in 1..20 {
            assert!((io_speed_per_task(n) * n as f64 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_speed_examples() {
        let mut rt = ServerRuntime::new(spec(2, 4), 64);
        rt.cpu_active = vec![0];
        assert_eq!(server_aggregate_speed(&rt), 1.0);
        rt.cpu_active = vec![0, 1, 2];
        assert!((server_aggregate_speed(&rt) - 2.0).abs() < 1e-12);
        rt.cpu_factor = 0.5;
        assert!((server_aggregate_speed(&rt) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn six_tasks_on_capped_server() {
        let mut rt = ServerRuntime::new(spec(2, 4), 64);
        let kinds: Vec<Admission> = (0..6).map(|i| admit_or_reject(&mut rt, i, QueueKind::Cpu)).collect();
        assert_eq!(&kinds[..4], &[Admission::Active; 4]);
        assert_eq!(&kinds[4..], &[Admission::Backlog; 2]);
        assert_eq!(rt.cpu_task_speed(), 0.5);
    }

    #[test]
    fn backlog_boundary() {
        let mut rt = ServerRuntime::new(spec(1, 1), 64);
        assert_eq!(admit_or_reject(&mut rt, 0, QueueKind::Cpu), Admission::Active);
        for i in 1..64 {
            assert_eq!(admit_or_reject(&mut rt, i, QueueKind::Cpu), Admission::Backlog);
        }
        assert_eq!(rt.cpu_backlog.len(), 63);
        assert_eq!(admit_or_reject(&mut rt, 64, QueueKind::Cpu), Admission::Backlog);
        assert_eq!(admit_or_reject(&mut rt, 65, QueueKind::Cpu), Admission::Rejected);
        assert_eq!(rt.cpu_backlog.len(), 64);
    }

    #[test]
    fn drain_examples() {
        let mut s = ServerSnapshot::idle(spec(1, 1), 64);
        assert_eq!(s.drain_time(), 0.0);
        s.admit(&[Stage { kind: QueueKind::Cpu, work: 2.0 }]);
        assert!((s.drain_time() - 2.0).abs() < 1e-12);
        s.admit(&[
            Stage { kind: QueueKind::Cpu, work: 1.0 },
            Stage { kind: QueueKind::Io, work: 0.5 },
        ]);
        assert!((s.drain_time() - 3.5).abs() < 1e-12);
    }
}
