//! Experiment front door for the load-balancing game: configuration schema,
//! presets, runners behind the `lbgame` CLI and CSV metric export.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod run;

pub use config::{
    table3_preset, Episode, ExperimentConfig, Output, PolicySelection, Rl, Seeds, ServerGroup, Table3Profile, Topology,
    Traffic, OUT_DIR_ENV, PRESET_RATE,
};
pub use metrics::{
    aggregate, export_trace, mean_std, nearest_rank, read_metric_rows, render_table, sig6, write_aggregate,
    write_curve, write_metric_rows, AggregateRow, MetricRow,
};
pub use run::{analytic, parse_seeds, report, Evaluation, Runner};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("threshold not met: {0}")]
    Threshold(String),
    #[error("io error: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Runtime(_) => "runtime",
            HarnessError::Threshold(_) => "threshold",
            HarnessError::Io(_) => "io",
        }
    }

    /// 2 for configuration problems, 3 for runtime and IO failures, 4 for unmet thresholds.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) | HarnessError::Io(_) => 3,
            HarnessError::Threshold(_) => 4,
        }
    }

    /// One-line JSON error record for stderr.
    pub fn record(&self) -> String {
        let message = match self {
            HarnessError::Config(m) | HarnessError::Runtime(m) | HarnessError::Threshold(m) | HarnessError::Io(m) => m,
        };
        serde_json::json!({ "error": self.kind(), "message": message, "exit_code": self.exit_code() }).to_string()
    }
}

impl From<lbgame_marl::MarlError> for HarnessError {
    fn from(e: lbgame_marl::MarlError) -> Self {
        match e {
            lbgame_marl::MarlError::Config(m) => HarnessError::Config(m),
            lbgame_marl::MarlError::Io(m) => HarnessError::Io(m),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}

impl From<lbgame_sim::SimError> for HarnessError {
    fn from(e: lbgame_sim::SimError) -> Self {
        HarnessError::Runtime(e.to_string())
    }
}
