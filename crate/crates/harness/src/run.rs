use std::path::{Path, PathBuf};

use lbgame_marl::{
    checkpoint_path, evaluate_episode, new_learners, train, ActMode, AgentChoice, AgentLearnerF32, TrainConfig,
};
use lbgame_markov::{scenario_sweep, Preset, ScenarioSetup};
use lbgame_nn::Checkpoint;
use lbgame_sim::{run_episode, AgentPolicy, PolicyKind, SimTrace};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::metrics::{self, MetricRow};
use crate::HarnessError;

/// Parses `7`, `a..b` (exclusive) or `a..=b` (inclusive).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = |m: &str| HarnessError::Config(format!("seed range {text:?}: {m}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| bad(&e.to_string()));
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        vec![num(text)?]
    };
    if seeds.is_empty() {
        return Err(bad("empty range"));
    }
    Ok(seeds)
}

fn label(kinds: &[PolicyKind]) -> String {
    if kinds.iter().all(|k| *k == kinds[0]) {
        kinds[0].name().to_string()
    } else {
        kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join("+")
    }
}

/// One experiment bound to its seeds and output directory.
#[derive(Debug, Clone)]
pub struct Runner {
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Also write per-task, per-tick and per-reward CSVs for each run.
    pub traces: bool,
}

/// Rows of an evaluation together with the traces they were computed from.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub rows: Vec<MetricRow>,
    pub traces: Vec<SimTrace>,
}

impl Runner {
    pub fn new(config: ExperimentConfig) -> Self {
        Self {
            seeds: config.seeds.list(),
            out: config.output_dir(),
            config,
            traces: false,
        }
    }

    /// `<out>/<name>_<hash>`.
    pub fn experiment_dir(&self) -> PathBuf {
        self.out.join(format!("{}_{}", self.config.name, self.config.hash()))
    }

    pub fn checkpoint_dir(&self, seed: u64) -> PathBuf {
        self.experiment_dir().join("checkpoints").join(format!("seed{seed}"))
    }

    fn export(&self, tag: &str, seed: u64, trace: &SimTrace) -> Result<(), HarnessError> {
        if self.traces {
            let dir = self.experiment_dir().join("traces");
            metrics::export_trace(&dir, &format!("{tag}_seed{seed}"), &self.config.hash(), trace)?;
        }
        Ok(())
    }

    /// Baseline episodes, one row per seed, written to `simulate_<policy>.csv`.
    pub fn simulate(&self, policy: Option<PolicyKind>) -> Result<Evaluation, HarnessError> {
        let sim = self.config.sim_config()?;
        let kinds = policy.map_or_else(|| self.config.policies(), |k| vec![k; sim.agents]);
        if kinds.contains(&PolicyKind::Rl) {
            return Err(HarnessError::Config("simulate runs baselines only; use `evaluate` for rl".into()));
        }
        let name = label(&kinds);
        let hash = self.config.hash();
        let weights = sim.nominal_weights();
        let mut eval = Evaluation { rows: Vec::new(), traces: Vec::new() };
        for &seed in &self.seeds {
            let mut policies: Vec<AgentPolicy> =
                kinds.iter().map(|&k| AgentPolicy::baseline(k, &weights).expect("baseline kind")).collect();
            let trace = run_episode(&sim, &mut policies, seed)?;
            log::info!("simulate {name} seed {seed}: mean FCT {:?}", trace.mean_fct());
            self.export(&name, seed, &trace)?;
            eval.rows.push(MetricRow::from_trace(&hash, &name, seed, &trace));
            eval.traces.push(trace);
        }
        metrics::write_metric_rows(&self.experiment_dir().join(format!("simulate_{name}.csv")), &eval.rows)?;
        Ok(eval)
    }

    /// Trains every agent on each seed, writing checkpoints and a learning curve per seed.
    pub fn train(&self) -> Result<Vec<PathBuf>, HarnessError> {
        let sim = self.config.sim_config()?;
        let hash = self.config.hash();
        let mut dirs = Vec::new();
        for &seed in &self.seeds {
            let dir = self.checkpoint_dir(seed);
            std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
            let mut tc = TrainConfig::new(sim.clone(), self.config.rl.sac.clone(), self.config.rl.episodes, seed);
            tc.checkpoint_dir = Some(dir.clone());
            tc.checkpoint_every = self.config.rl.checkpoint_every;
            tc.config_hash = hash.clone();
            let outcome = train::<f32>(&tc)?;
            log::info!("train seed {seed}: {} episodes, {} fallbacks", tc.episodes, outcome.fallbacks);
            let curve = self.experiment_dir().join(format!("curve_seed{seed}.csv"));
            metrics::write_curve(&curve, &hash, seed, &outcome.curve)?;
            dirs.push(dir);
        }
        Ok(dirs)
    }

    /// Restores the learners of one training seed from `dir`.
    pub fn load_learners(&self, dir: &Path, seed: u64) -> Result<Vec<AgentLearnerF32>, HarnessError> {
        let sim = self.config.sim_config()?;
        let hash = self.config.hash();
        let mut learners = new_learners::<f32>(&sim, &self.config.rl.sac, seed)?;
        for (i, l) in learners.iter_mut().enumerate() {
            let path = checkpoint_path(dir, i);
            if !path.exists() {
                return Err(HarnessError::Runtime(format!("missing checkpoint {}", path.display())));
            }
            let ck = Checkpoint::load(&path).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            ck.require_hash(&hash).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            l.restore(&ck)?;
        }
        Ok(learners)
    }

    /// Evaluates the checkpoints of each seed on that seed's episode.
    /// Agents whose configured policy is a baseline keep it.
    pub fn evaluate(&self, checkpoints: Option<&Path>, deterministic: bool) -> Result<Evaluation, HarnessError> {
        let sim = self.config.sim_config()?;
        let kinds = self.config.policies();
        let name = label(&kinds);
        let hash = self.config.hash();
        let mode = if deterministic { ActMode::Eval } else { ActMode::Train };
        let mut eval = Evaluation { rows: Vec::new(), traces: Vec::new() };
        for &seed in &self.seeds {
            let dir = checkpoints.map_or_else(|| self.checkpoint_dir(seed), |d| d.join(format!("seed{seed}")));
            let learners = self.load_learners(&dir, seed)?;
            let choices: Vec<AgentChoice<f32>> = kinds
                .iter()
                .zip(&learners)
                .map(|(&k, l)| if k == PolicyKind::Rl { AgentChoice::Learned(l) } else { AgentChoice::Baseline(k) })
                .collect();
            let trace = evaluate_episode(&sim, &choices, mode, seed)?;
            log::info!("evaluate {name} seed {seed}: mean FCT {:?}", trace.mean_fct());
            self.export(&name, seed, &trace)?;
            eval.rows.push(MetricRow::from_trace(&hash, &name, seed, &trace));
            eval.traces.push(trace);
        }
        metrics::write_metric_rows(&self.experiment_dir().join(format!("evaluate_{name}.csv")), &eval.rows)?;
        Ok(eval)
    }

    /// Runs `simulate` once per value of a dotted config key.
    pub fn sweep(&self, key: &str, values: &[String], policy: Option<PolicyKind>) -> Result<Vec<MetricRow>, HarnessError> {
        let mut rows = Vec::new();
        let mut index = Vec::new();
        for v in values {
            let config = self.config.with_override(key, v)?;
            index.push(vec![key.to_string(), v.clone(), config.hash()]);
            let runner = Runner { config, ..self.clone() };
            rows.extend(runner.simulate(policy)?.rows);
        }
        let dir = self.out.join(format!("sweep_{}_{}", self.config.name, self.config.hash()));
        metrics::write_metric_rows(&dir.join("rows.csv"), &rows)?;
        write_csv(&dir.join("index.csv"), &["key", "value", "config_hash"], &index)?;
        Ok(rows)
    }
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let io = |e: &dyn std::fmt::Display| HarnessError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io(&e))?;
    w.write_record(header).map_err(|e| io(&e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))
}

/// Four chain policies under four presets, written to `<out>/analytic.csv`.
pub fn analytic(setup: &ScenarioSetup, out: &Path) -> Result<Vec<lbgame_markov::ScenarioRow>, HarnessError> {
    let rows = scenario_sweep(setup, &Preset::ALL).map_err(|e| HarnessError::Runtime(e.to_string()))?;
    let json = serde_json::to_string(setup).expect("setup serialises");
    let hash = hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                hash.clone(),
                r.policy.name().to_string(),
                r.preset.name().to_string(),
                metrics::sig6(r.weighted_service_duration),
            ]
        })
        .collect();
    write_csv(&out.join("analytic.csv"), &["config_hash", "policy", "preset", "weighted_service_duration"], &table)?;
    Ok(rows)
}

/// Aggregates metric CSVs into `<out>/report.csv`.
pub fn report(inputs: &[PathBuf], out: &Path) -> Result<Vec<metrics::AggregateRow>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("report needs at least one input CSV".into()));
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(metrics::read_metric_rows(p)?);
    }
    let agg = metrics::aggregate(&rows);
    metrics::write_aggregate(&out.join("report.csv"), &agg)?;
    Ok(agg)
}
