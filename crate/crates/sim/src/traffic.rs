use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use lbgame_core::ServerSpec;

use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueKind {
    Cpu,
    Io,
}

/// One processing stage of a task with its nominal work in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub kind: QueueKind,
    pub work: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTemplate {
    pub kind: QueueKind,
    pub mean_work: f64,
}

/// Application profiles with CPU-then-IO stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AppProfile {
    /// 1.0 s CPU.
    PureCpu,
    /// 0.75 s CPU + 0.25 s IO.
    CpuIntensive,
    /// 0.5 s CPU + 0.5 s IO.
    Balanced,
    /// 0.25 s CPU + 0.75 s IO.
    IoIntensive,
}

impl AppProfile {
    pub fn stages(self) -> Vec<StageTemplate> {
        let (cpu, io) = match self {
            AppProfile::PureCpu => (1.0, 0.0),
            AppProfile::CpuIntensive => (0.75, 0.25),
            AppProfile::Balanced => (0.5, 0.5),
            AppProfile::IoIntensive => (0.25, 0.75),
        };
        let mut stages = vec![StageTemplate {
            kind: QueueKind::Cpu,
            mean_work: cpu,
        }];
        if io > 0.0 {
            stages.push(StageTemplate {
                kind: QueueKind::Io,
                mean_work: io,
            });
        }
        stages
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficProfile {
    /// Total arrival rate `λ` over all agents, tasks per second.
    pub rate: f64,
    pub stages: Vec<StageTemplate>,
}

impl TrafficProfile {
    pub fn from_app(rate: f64, app: AppProfile) -> Self {
        Self {
            rate,
            stages: app.stages(),
        }
    }

    pub fn mean_work(&self) -> f64 {
        self.stages.iter().map(|s| s.mean_work).sum()
    }

    pub fn mean_cpu_work(&self) -> f64 {
        self.stages
            .iter()
            .filter(|s| s.kind == QueueKind::Cpu)
            .map(|s| s.mean_work)
            .sum()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate.is_finite() && self.rate >= 0.0) {
            return Err(format!("traffic rate must be >= 0, got {}", self.rate));
        }
        if self.stages.is_empty() {
            return Err("traffic profile has no stages".into());
        }
        if self.stages.iter().any(|s| !(s.mean_work.is_finite() && s.mean_work >= 0.0)) {
            return Err("stage mean work must be finite and >= 0".into());
        }
        if !(self.mean_work() > 0.0) {
            return Err("total mean work must be positive".into());
        }
        Ok(())
    }

    /// Offered CPU work per second over nominal CPU capacity.
    pub fn cpu_utilisation(&self, servers: &[ServerSpec]) -> f64 {
        let capacity: f64 = servers.iter().map(ServerSpec::nominal_capacity).sum();
        self.rate * self.mean_cpu_work() / capacity
    }
}

/// A task as generated at an agent, before assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalSpec {
    pub time: f64,
    pub stages: Vec<Stage>,
}

/// `M` independent Poisson streams of rate `λ/M` over `[0, duration)`.
pub fn generate_arrivals(
    profile: &TrafficProfile,
    duration: f64,
    agents: usize,
    seed: u64,
) -> Vec<Vec<ArrivalSpec>> {
    let mut out = vec![Vec::new(); agents];
    if agents == 0 || profile.rate <= 0.0 || duration <= 0.0 {
        return out;
    }
    let per_agent = profile.rate / agents as f64;
    let gap = Exp::new(per_agent).expect("positive rate");
    let works: Vec<Option<Exp<f64>>> = profile
        .stages
        .iter()
        .map(|s| (s.mean_work > 0.0).then(|| Exp::new(1.0 / s.mean_work).expect("positive mean")))
        .collect();
    for (agent, tasks) in out.iter_mut().enumerate() {
        let mut timing = stream(seed, "arrivals", agent as u64);
        let mut work_rng = stream(seed, "workloads", agent as u64);
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut timing);
            if t >= duration {
                break;
            }
            let stages = profile
                .stages
                .iter()
                .zip(&works)
                .filter_map(|(tpl, dist)| {
                    dist.as_ref().map(|d| Stage {
                        kind: tpl.kind,
                        work: d.sample(&mut work_rng).max(f64::MIN_POSITIVE),
                    })
                })
                .collect();
            tasks.push(ArrivalSpec { time: t, stages });
        }
    }
    out
}

pub const DEFAULT_LATENCY_RANGE: (f64, f64) = (1e-4, 1e-3);

/// One-hop communication latency, uniform on `[lo, hi]` seconds.
pub fn sample_latency(rng: &mut SimRng, range: (f64, f64)) -> f64 {
    if range.1 <= range.0 {
        return range.0;
    }
    rng.gen_range(range.0..=range.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_empty_streams() {
        let p = TrafficProfile::from_app(0.0, AppProfile::PureCpu);
        let a = generate_arrivals(&p, 60.0, 3, 1);
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(Vec::is_empty));
    }

    #[test]
    fn pure_cpu_has_single_stage() {
        assert_eq!(AppProfile::PureCpu.stages().len(), 1);
        let p = TrafficProfile::from_app(5.0, AppProfile::PureCpu);
        for t in generate_arrivals(&p, 10.0, 2, 3).concat() {
            assert_eq!(t.stages.len(), 1);
            assert_eq!(t.stages[0].kind, QueueKind::Cpu);
            assert!(t.stages[0].work > 0.0);
        }
    }

    #[test]
    fn arrivals_sorted_within_duration() {
        let p = TrafficProfile::from_app(20.0, AppProfile::Balanced);
        for stream in generate_arrivals(&p, 5.0, 2, 9) {
            assert!(stream.windows(2).all(|w| w[0].time <= w[1].time));
            assert!(stream.iter().all(|a| a.time >= 0.0 && a.time < 5.0));
        }
    }

    #[test]
    fn latency_support() {
        let mut rng = stream(1, "latency", 0);
        for _ in 0..10_000 {
            let l = sample_latency(&mut rng, DEFAULT_LATENCY_RANGE);
            assert!((1e-4..=1e-3).contains(&l));
        }
        let mut a = stream(5, "latency", 0);
        let mut b = stream(5, "latency", 0);
        for _ in 0..100 {
            assert_eq!(
                sample_latency(&mut a, DEFAULT_LATENCY_RANGE).to_bits(),
                sample_latency(&mut b, DEFAULT_LATENCY_RANGE).to_bits()
            );
        }
    }

    #[test]
    fn validation() {
        assert!(TrafficProfile { rate: -1.0, stages: AppProfile::PureCpu.stages() }.validate().is_err());
        assert!(TrafficProfile { rate: 1.0, stages: vec![] }.validate().is_err());
        assert!(TrafficProfile::from_app(1.0, AppProfile::IoIntensive).validate().is_ok());
    }
}
