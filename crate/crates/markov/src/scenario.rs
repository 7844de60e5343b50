use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::chain::{
    build_transition, stationary, weighted_service_duration, ChainConfig, ChainDistribution, ChainError,
    ChainPolicy, DEFAULT_MAX_ITERATIONS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// All traffic observed, weights match speeds.
    Ideal,
    /// Half the traffic unobserved (`γ = λ`).
    HalfObserved,
    /// Two thirds unobserved (`γ = 2λ`).
    ThirdObserved,
    /// All traffic observed, weights inverted (`w_1/w_2 = 1/2`).
    Misconfigured,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Ideal,
        Preset::HalfObserved,
        Preset::ThirdObserved,
        Preset::Misconfigured,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Ideal => "ideal",
            Preset::HalfObserved => "50%-Q",
            Preset::ThirdObserved => "33%-Q",
            Preset::Misconfigured => "misconfigured",
        }
    }

    /// Unobserved share `γ / (λ + γ)`.
    fn unobserved_share(self) -> f64 {
        match self {
            Preset::Ideal | Preset::Misconfigured => 0.0,
            Preset::HalfObserved => 0.5,
            Preset::ThirdObserved => 2.0 / 3.0,
        }
    }
}

/// Shared parameters of the preset sweep. Server 1 is twice as fast as server 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSetup {
    pub queue_cap: usize,
    /// Offered load `(λ + γ) / (v_1 + v_2)`.
    pub load: f64,
    /// Per-timeslot probability budget `λ + γ + v_1 + v_2`.
    pub budget: f64,
    pub speed_ratio: f64,
}

impl Default for ScenarioSetup {
    fn default() -> Self {
        Self {
            queue_cap: 30,
            load: 0.1,
            budget: 1.0,
            speed_ratio: 2.0,
        }
    }
}

impl ScenarioSetup {
    pub fn config<T: Float>(&self, policy: ChainPolicy, preset: Preset) -> ChainConfig<T> {
        let t = |x: f64| T::from(x).unwrap();
        let service_total = self.budget / (1.0 + self.load);
        let v1 = service_total * self.speed_ratio / (1.0 + self.speed_ratio);
        let v2 = service_total - v1;
        let arrivals = self.load * service_total;
        let gamma = arrivals * preset.unobserved_share();
        let weights = match preset {
            Preset::Misconfigured => [1.0, self.speed_ratio],
            _ => [self.speed_ratio, 1.0],
        };
        ChainConfig {
            queue_cap: self.queue_cap,
            observed_rate: t(arrivals - gamma),
            unobserved_rate: t(gamma),
            service_rates: [t(v1), t(v2)],
            policy,
            weights: weights.map(t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub policy: ChainPolicy,
    pub preset: Preset,
    pub weighted_service_duration: f64,
}

pub fn evaluate<T: Float>(config: &ChainConfig<T>, tolerance: T) -> Result<T, ChainError> {
    let op = build_transition(config)?;
    let dist = stationary(
        &op,
        &ChainDistribution::empty_system(config.queue_cap),
        tolerance,
        DEFAULT_MAX_ITERATIONS,
    )?;
    Ok(weighted_service_duration(&dist, config.service_rates))
}

/// Weighted service duration for every (policy, preset) pair, in timeslots.
pub fn scenario_sweep(setup: &ScenarioSetup, presets: &[Preset]) -> Result<Vec<ScenarioRow>, ChainError> {
    let mut rows = Vec::new();
    for &preset in presets {
        for policy in ChainPolicy::ALL {
            let config: ChainConfig<f64> = setup.config(policy, preset);
            rows.push(ScenarioRow {
                policy,
                preset,
                weighted_service_duration: evaluate(&config, 1e-10)?,
            });
        }
    }
    Ok(rows)
}
