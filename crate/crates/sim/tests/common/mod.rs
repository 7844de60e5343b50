#![allow(dead_code)]

use lbgame_core::ServerSpec;
use lbgame_sim::{AgentPolicy, AppProfile, PolicyKind, SimConfig, TrafficProfile};

/// 4×1-CPU then 4×2-CPU unit-rate servers.
pub fn topology() -> Vec<ServerSpec> {
    (0..8)
        .map(|j| {
            let p = if j < 4 { 1 } else { 2 };
            ServerSpec::new(j, 1.0, p, p).unwrap()
        })
        .collect()
}

pub fn table_config(app: AppProfile, rate: f64) -> SimConfig {
    SimConfig::new(topology(), 2, TrafficProfile::from_app(rate, app), 60.0)
}

pub fn baselines(cfg: &SimConfig, kind: PolicyKind) -> Vec<AgentPolicy<'static>> {
    let w = cfg.nominal_weights();
    (0..cfg.agents).map(|_| AgentPolicy::baseline(kind, &w).unwrap()).collect()
}
