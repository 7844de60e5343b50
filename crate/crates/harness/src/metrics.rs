use std::collections::BTreeMap;
use std::path::Path;

use lbgame_sim::{SimTrace, TaskStatus};

use crate::HarnessError;

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-5..=9).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.5e}")
    }
}

/// Nearest-rank percentile of unsorted values: the `⌈p/100 · n⌉`-th smallest.
pub fn nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

/// One (policy, seed) row of a metric report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub config_hash: String,
    pub policy: String,
    pub seed: u64,
    pub mean_fct: f64,
    pub p90_fct: f64,
    pub p99_fct: f64,
    pub makespan: f64,
    pub mean_vbf: f64,
    pub mean_pbf: f64,
    pub rejected: usize,
    pub tasks: usize,
}

pub const METRIC_COLUMNS: [&str; 11] = [
    "config_hash", "policy", "seed", "mean_fct", "p90_fct", "p99_fct", "makespan", "mean_vbf", "mean_pbf",
    "rejected", "tasks",
];

/// The float-valued metric columns, in file order.
pub const METRIC_NAMES: [&str; 8] = [
    "mean_fct", "p90_fct", "p99_fct", "makespan", "mean_vbf", "mean_pbf", "rejected", "tasks",
];

impl MetricRow {
    /// Rejected tasks enter the FCT statistics at the timeout value.
    pub fn from_trace(config_hash: &str, policy: &str, seed: u64, trace: &SimTrace) -> Self {
        let fct = trace.fct_values();
        Self {
            config_hash: config_hash.to_string(),
            policy: policy.to_string(),
            seed,
            mean_fct: trace.mean_fct().unwrap_or(f64::NAN),
            p90_fct: nearest_rank(&fct, 90.0).unwrap_or(f64::NAN),
            p99_fct: nearest_rank(&fct, 99.0).unwrap_or(f64::NAN),
            makespan: trace.makespan(),
            mean_vbf: trace.mean_vbf(),
            mean_pbf: trace.mean_pbf(),
            rejected: trace.rejected(),
            tasks: fct.len(),
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [
            self.mean_fct,
            self.p90_fct,
            self.p99_fct,
            self.makespan,
            self.mean_vbf,
            self.mean_pbf,
            self.rejected as f64,
            self.tasks as f64,
        ]
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![self.config_hash.clone(), self.policy.clone(), self.seed.to_string()];
        r.extend(self.values()[..6].iter().map(|&v| sig6(v)));
        r.push(self.rejected.to_string());
        r.push(self.tasks.to_string());
        r
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_metric_rows(path: &Path, rows: &[MetricRow]) -> Result<(), HarnessError> {
    write_table(path, &METRIC_COLUMNS, rows.iter().map(MetricRow::record))
}

pub fn read_metric_rows(path: &Path) -> Result<Vec<MetricRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| io_err(path, e))?.iter().map(String::from).collect();
    if header != METRIC_COLUMNS {
        return Err(HarnessError::Config(format!("{}: not a metric report (header {header:?})", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        let f = |k: usize| -> Result<f64, HarnessError> {
            rec[k].parse().map_err(|e| HarnessError::Config(format!("{}: column {}: {e}", path.display(), METRIC_COLUMNS[k])))
        };
        out.push(MetricRow {
            config_hash: rec[0].to_string(),
            policy: rec[1].to_string(),
            seed: f(2)? as u64,
            mean_fct: f(3)?,
            p90_fct: f(4)?,
            p99_fct: f(5)?,
            makespan: f(6)?,
            mean_vbf: f(7)?,
            mean_pbf: f(8)?,
            rejected: f(9)? as usize,
            tasks: f(10)? as usize,
        });
    }
    Ok(out)
}

/// Mean ± population standard deviation of one metric for one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub config_hash: String,
    pub policy: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub const AGGREGATE_COLUMNS: [&str; 6] = ["config_hash", "policy", "metric", "mean", "std", "n"];

pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Groups rows by (config hash, policy) in first-seen order.
pub fn aggregate(rows: &[MetricRow]) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.config_hash.clone(), r.policy.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for key in order {
        let g = &groups[&key];
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let vals: Vec<f64> = g.iter().map(|r| r.values()[k]).collect();
            let (mean, std) = mean_std(&vals);
            out.push(AggregateRow {
                config_hash: key.0.clone(),
                policy: key.1.clone(),
                metric: name.to_string(),
                mean,
                std,
                n: vals.len(),
            });
        }
    }
    out
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    write_table(
        path,
        &AGGREGATE_COLUMNS,
        rows.iter().map(|r| {
            vec![r.config_hash.clone(), r.policy.clone(), r.metric.clone(), sig6(r.mean), sig6(r.std), r.n.to_string()]
        }),
    )
}

/// Plain-text comparison table of mean FCT and p99 per policy.
pub fn render_table(rows: &[AggregateRow]) -> String {
    let mut s = format!("{:<18} {:<10} {:>22} {:>22} {:>9}\n", "config", "policy", "mean FCT (s)", "p99 FCT (s)", "rejected");
    let find = |c: &str, p: &str, m: &str| rows.iter().find(|r| r.config_hash == c && r.policy == p && r.metric == m);
    let mut seen = Vec::new();
    for r in rows {
        let key = (r.config_hash.as_str(), r.policy.as_str());
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let pm = |m: &str| find(key.0, key.1, m).map_or("-".into(), |a| format!("{} ± {}", sig6(a.mean), sig6(a.std)));
        s.push_str(&format!("{:<18} {:<10} {:>22} {:>22} {:>9}\n", key.0, key.1, pm("mean_fct"), pm("p99_fct"), pm("rejected")));
    }
    s
}

/// Per-task, per-tick-load and per-agent-reward CSVs for one trace, in long format.
pub fn export_trace(dir: &Path, stem: &str, config_hash: &str, trace: &SimTrace) -> Result<(), HarnessError> {
    let status = |s: TaskStatus| match s {
        TaskStatus::Pending => "pending",
        TaskStatus::InService => "in-service",
        TaskStatus::Completed => "completed",
        TaskStatus::Rejected => "rejected",
    };
    let opt = |v: Option<f64>| v.map(sig6).unwrap_or_default();
    write_table(
        &dir.join(format!("{stem}_tasks.csv")),
        &["config_hash", "seed", "task", "agent", "server", "arrival", "work", "fct", "status"],
        trace.tasks.iter().map(|t| {
            vec![
                config_hash.to_string(),
                trace.seed.to_string(),
                t.id.to_string(),
                t.agent.to_string(),
                t.assigned_server.map(|s| s.to_string()).unwrap_or_default(),
                sig6(t.arrival_time),
                sig6(t.total_work()),
                match t.status {
                    TaskStatus::Rejected => sig6(trace.reject_timeout),
                    _ => opt(t.fct()),
                },
                status(t.status).to_string(),
            ]
        }),
    )?;
    write_table(
        &dir.join(format!("{stem}_loads.csv")),
        &["config_hash", "seed", "tick", "time", "server", "load"],
        trace.ticks.iter().flat_map(|k| {
            k.loads.as_slice().iter().enumerate().map(move |(j, &l)| {
                vec![
                    config_hash.to_string(),
                    trace.seed.to_string(),
                    k.index.to_string(),
                    sig6(k.time),
                    j.to_string(),
                    sig6(l),
                ]
            })
        }),
    )?;
    write_table(
        &dir.join(format!("{stem}_rewards.csv")),
        &["config_hash", "seed", "agent", "tick", "time", "reward"],
        trace.agent_steps.iter().enumerate().flat_map(|(i, steps)| {
            steps.iter().map(move |s| {
                vec![
                    config_hash.to_string(),
                    trace.seed.to_string(),
                    i.to_string(),
                    s.tick.to_string(),
                    sig6(s.time),
                    sig6(s.reward),
                ]
            })
        }),
    )
}

pub fn write_curve(path: &Path, config_hash: &str, seed: u64, rows: &[lbgame_marl::CurveRow]) -> Result<(), HarnessError> {
    write_table(
        path,
        &["config_hash", "seed", "episode", "agent", "mean_reward", "actor_loss", "critic_loss", "alpha"],
        rows.iter().map(|r| {
            vec![
                config_hash.to_string(),
                seed.to_string(),
                r.episode.to_string(),
                r.agent.to_string(),
                sig6(r.mean_reward),
                sig6(r.actor_loss),
                sig6(r.critic_loss),
                sig6(r.alpha),
            ]
        }),
    )
}
