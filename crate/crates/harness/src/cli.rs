use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lbgame_markov::ScenarioSetup;
use lbgame_sim::PolicyKind;

use crate::config::{table3_preset, ExperimentConfig, Table3Profile};
use crate::metrics::render_table;
use crate::run::{self, parse_seeds, Runner};
use crate::HarnessError;

#[derive(Debug, Parser)]
#[command(name = "lbgame", version, about = "Multi-agent load-balancing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run baseline policies and write one metric row per seed.
    Simulate(Common),
    /// Train one set of SAC agents per seed.
    Train(Common),
    /// Evaluate trained checkpoints.
    Evaluate(Common),
    /// Two-server Markov chain over the four policy presets.
    Analytic {
        #[arg(long, default_value_t = 30)]
        queue_cap: usize,
        /// Offered load (λ + γ) / (v1 + v2).
        #[arg(long, default_value_t = 0.1)]
        load: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate once per value of a config key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted key, e.g. `traffic.rate`.
        #[arg(long)]
        key: String,
        /// Comma-separated TOML literals.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Aggregate metric CSVs into mean ± std rows.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment TOML file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in topology: 50-50, 75-25 or 100-cpu.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// `a..b` or `a..=b`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Policy of every agent.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub deterministic_eval: Option<bool>,
    /// Directory holding `seed<k>/agent<i>.ckpt`.
    #[arg(long)]
    pub checkpoints: Option<PathBuf>,
    /// Also export per-task, load and reward traces.
    #[arg(long)]
    pub traces: bool,
}

pub fn parse_policy(name: &str) -> Result<PolicyKind, HarnessError> {
    PolicyKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| HarnessError::Config(format!("unknown policy {name:?}")))
}

impl Common {
    pub fn runner(&self) -> Result<Runner, HarnessError> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::load(path)?,
            (None, Some(p)) => table3_preset(p.parse::<Table3Profile>()?),
            (None, None) => return Err(HarnessError::Config("one of --config or --preset is required".into())),
        };
        if let Some(n) = self.episodes {
            config.rl.episodes = n;
        }
        if let Some(d) = self.deterministic_eval {
            config.rl.deterministic_eval = d;
        }
        if let Some(p) = &self.policy {
            config.policy.all = parse_policy(p)?;
            config.policy.per_agent = None;
        }
        config.validate()?;
        let mut runner = Runner::new(config);
        if let Some(s) = self.seed {
            runner.seeds = vec![s];
        }
        if let Some(r) = &self.seeds {
            runner.seeds = parse_seeds(r)?;
        }
        if let Some(o) = &self.out {
            runner.out = o.clone();
        }
        runner.traces = self.traces;
        Ok(runner)
    }
}

/// Executes one parsed command, printing a summary to stdout.
pub fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(c) => {
            let runner = c.runner()?;
            let rows = runner.simulate(None)?.rows;
            print!("{}", render_table(&crate::metrics::aggregate(&rows)));
        }
        Command::Train(c) => {
            let runner = c.runner()?;
            for d in runner.train()? {
                println!("{}", d.display());
            }
        }
        Command::Evaluate(c) => {
            let runner = c.runner()?;
            let det = runner.config.rl.deterministic_eval;
            let rows = runner.evaluate(c.checkpoints.as_deref(), det)?.rows;
            print!("{}", render_table(&crate::metrics::aggregate(&rows)));
        }
        Command::Analytic { queue_cap, load, out } => {
            let setup = ScenarioSetup { queue_cap, load, ..ScenarioSetup::default() };
            for r in run::analytic(&setup, &out)? {
                println!("{:<14} {:<5} {}", r.preset.name(), r.policy.name(), crate::metrics::sig6(r.weighted_service_duration));
            }
        }
        Command::Sweep { common, key, values } => {
            let runner = common.runner()?;
            let policy = common.policy.as_deref().map(parse_policy).transpose()?;
            let rows = runner.sweep(&key, &values, policy)?;
            print!("{}", render_table(&crate::metrics::aggregate(&rows)));
        }
        Command::Report { inputs, out } => {
            print!("{}", render_table(&run::report(&inputs, &out)?));
        }
    }
    Ok(())
}
