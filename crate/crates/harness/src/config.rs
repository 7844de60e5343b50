use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lbgame_core::{FairnessKind, ServerSpec, DEFAULT_LOG_EPSILON};
use lbgame_marl::SacConfig;
use lbgame_sim::{AppProfile, CapacityChange, PolicyKind, SimConfig, StageTemplate, TrafficProfile};

use crate::HarnessError;

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "LBGAME_OUT";

/// Tasks per second at 84.5% CPU utilisation of the 12-CPU preset topology.
pub const PRESET_RATE: f64 = 10.14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerGroup {
    pub count: usize,
    #[serde(default = "one")]
    pub processing_rate: f64,
    pub cpu_count: u32,
    /// Defaults to `cpu_count`.
    #[serde(default)]
    pub cpu_cap: Option<u32>,
    #[serde(default = "yes")]
    pub io_capable: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub agents: usize,
    pub groups: Vec<ServerGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traffic {
    pub rate: f64,
    /// A named application profile, or explicit `stages`.
    #[serde(default)]
    pub profile: Option<AppProfile>,
    #[serde(default)]
    pub stages: Option<Vec<StageTemplate>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Episode {
    pub duration: f64,
    pub tick: f64,
    pub backlog_capacity: usize,
    pub reject_timeout: f64,
    pub latency: [f64; 2],
    pub reservoir_size: usize,
    pub feature_discount: f64,
    pub reward: FairnessKind,
    pub log_epsilon: f64,
}

impl Default for Episode {
    fn default() -> Self {
        let d = SimConfig::new(Vec::new(), 1, TrafficProfile::from_app(1.0, AppProfile::PureCpu), 60.0);
        Self {
            duration: d.duration,
            tick: d.tick,
            backlog_capacity: d.backlog_capacity,
            reject_timeout: d.reject_timeout,
            latency: [d.latency.0, d.latency.1],
            reservoir_size: d.reservoir_size,
            feature_discount: d.feature_discount,
            reward: FairnessKind::Vbf,
            log_epsilon: DEFAULT_LOG_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySelection {
    /// Policy of every agent unless `per_agent` is given.
    pub all: PolicyKind,
    pub per_agent: Option<Vec<PolicyKind>>,
}

impl Default for PolicySelection {
    fn default() -> Self {
        Self {
            all: PolicyKind::Rl,
            per_agent: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rl {
    pub episodes: usize,
    pub deterministic_eval: bool,
    pub checkpoint_every: usize,
    pub sac: SacConfig,
}

impl Default for Rl {
    fn default() -> Self {
        Self {
            episodes: 500,
            deterministic_eval: true,
            checkpoint_every: 10,
            sac: SacConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Seeds {
    pub start: u64,
    pub count: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { start: 0, count: 10 }
    }
}

impl Seeds {
    pub fn list(&self) -> Vec<u64> {
        (self.start..self.start + self.count).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: PathBuf,
}

impl Default for Output {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub topology: Topology,
    pub traffic: Traffic,
    #[serde(default)]
    pub episode: Episode,
    #[serde(default)]
    pub policy: PolicySelection,
    #[serde(default)]
    pub rl: Rl,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub capacity_changes: Vec<CapacityChange>,
    #[serde(default)]
    pub output: Output,
}

/// Application mixes of the moderate-scale simulation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table3Profile {
    Cpu100,
    Cpu75Io25,
    Cpu50Io50,
}

impl Table3Profile {
    pub const ALL: [Table3Profile; 3] = [Table3Profile::Cpu50Io50, Table3Profile::Cpu75Io25, Table3Profile::Cpu100];

    pub fn name(self) -> &'static str {
        match self {
            Table3Profile::Cpu100 => "100-cpu",
            Table3Profile::Cpu75Io25 => "75-25",
            Table3Profile::Cpu50Io50 => "50-50",
        }
    }

    pub fn app(self) -> AppProfile {
        match self {
            Table3Profile::Cpu100 => AppProfile::PureCpu,
            Table3Profile::Cpu75Io25 => AppProfile::CpuIntensive,
            Table3Profile::Cpu50Io50 => AppProfile::Balanced,
        }
    }
}

impl std::str::FromStr for Table3Profile {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown preset {s:?} (expected 50-50, 75-25 or 100-cpu)")))
    }
}

/// Two agents, 4×1-CPU + 4×2-CPU unit-rate servers, 0.5 s ticks, 60 s episodes.
pub fn table3_preset(profile: Table3Profile) -> ExperimentConfig {
    let group = |cpus| ServerGroup {
        count: 4,
        processing_rate: 1.0,
        cpu_count: cpus,
        cpu_cap: None,
        io_capable: true,
    };
    ExperimentConfig {
        name: format!("table3-{}", profile.name()),
        topology: Topology {
            agents: 2,
            groups: vec![group(1), group(2)],
        },
        traffic: Traffic {
            rate: PRESET_RATE,
            profile: Some(profile.app()),
            stages: None,
        },
        episode: Episode::default(),
        policy: PolicySelection::default(),
        rl: Rl::default(),
        seeds: Seeds::default(),
        capacity_changes: Vec::new(),
        output: Output::default(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn servers(&self) -> Result<Vec<ServerSpec>, HarnessError> {
        let mut out = Vec::new();
        for g in &self.topology.groups {
            for _ in 0..g.count {
                let mut s = ServerSpec::new(out.len(), g.processing_rate, g.cpu_count, g.cpu_cap.unwrap_or(g.cpu_count))
                    .map_err(|e| HarnessError::Config(format!("server group: {e}")))?;
                s.io_capable = g.io_capable;
                out.push(s);
            }
        }
        Ok(out)
    }

    pub fn traffic_profile(&self) -> Result<TrafficProfile, HarnessError> {
        match (&self.traffic.profile, &self.traffic.stages) {
            (Some(app), None) => Ok(TrafficProfile::from_app(self.traffic.rate, *app)),
            (None, Some(stages)) => Ok(TrafficProfile {
                rate: self.traffic.rate,
                stages: stages.clone(),
            }),
            _ => Err(HarnessError::Config("traffic needs exactly one of `profile` or `stages`".into())),
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig, HarnessError> {
        let e = &self.episode;
        let mut sim = SimConfig::new(self.servers()?, self.topology.agents, self.traffic_profile()?, e.duration);
        sim.tick = e.tick;
        sim.backlog_capacity = e.backlog_capacity;
        sim.reject_timeout = e.reject_timeout;
        sim.latency = (e.latency[0], e.latency[1]);
        sim.reservoir_size = e.reservoir_size;
        sim.feature_discount = e.feature_discount;
        sim.reward = e.reward;
        sim.log_epsilon = e.log_epsilon;
        for c in &self.capacity_changes {
            sim.schedule_capacity_change(c.server, c.time, c.cpu_factor)
                .map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        sim.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(sim)
    }

    pub fn policies(&self) -> Vec<PolicyKind> {
        self.policy
            .per_agent
            .clone()
            .unwrap_or_else(|| vec![self.policy.all; self.topology.agents])
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.topology.groups.iter().all(|g| g.count == 0) {
            return Err(HarnessError::Config("topology has no servers".into()));
        }
        if let Some(p) = &self.policy.per_agent {
            if p.len() != self.topology.agents {
                return Err(HarnessError::Config(format!(
                    "policy.per_agent lists {} policies for {} agents",
                    p.len(),
                    self.topology.agents
                )));
            }
        }
        if self.seeds.count == 0 {
            return Err(HarnessError::Config("seeds.count must be positive".into()));
        }
        self.rl.sac.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.sim_config()?;
        Ok(())
    }

    /// Output directory after the environment override.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output.dir.clone())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form. Seeds and
    /// the output directory are left out, so every run of one experiment
    /// shares a hash and each row records its own seed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = Output::default();
        c.seeds = Seeds::default();
        let json = serde_json::to_string(&c).expect("config serialises");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    /// Sets a dotted key (e.g. `traffic.rate`) from a TOML literal and re-validates.
    pub fn with_override(&self, key: &str, literal: &str) -> Result<Self, HarnessError> {
        let mut root = serde_json::to_value(self).expect("config serialises");
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {literal}"))
            .map(|mut t| t.remove("v").expect("parsed key"))
            .or_else(|_| toml::from_str::<toml::Table>(&format!("v = \"{literal}\"")).map(|mut t| t.remove("v").expect("parsed key")))
            .map_err(|e| HarnessError::Config(format!("value {literal:?}: {e}")))?;
        let value = serde_json::to_value(value).expect("toml value converts");
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (k, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| HarnessError::Config(format!("key {key:?}: {part:?} is not a table")))?;
            if k + 1 == parts.len() {
                if !obj.contains_key(*part) {
                    return Err(HarnessError::Config(format!("unknown config key {key:?}")));
                }
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj
                .get_mut(*part)
                .ok_or_else(|| HarnessError::Config(format!("unknown config key {key:?}")))?;
        }
        let cfg: Self = serde_json::from_value(root).map_err(|e| HarnessError::Config(format!("{key}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
