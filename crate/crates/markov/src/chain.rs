use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("rate budget violated: λ+γ+v1+v2 = {0} > 1")]
    RateBudget(f64),
    #[error("invalid chain config: {0}")]
    Invalid(String),
    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainPolicy {
    Ecmp,
    Wcmp,
    Lsq,
    Sed,
}

impl ChainPolicy {
    pub const ALL: [ChainPolicy; 4] = [ChainPolicy::Ecmp, ChainPolicy::Wcmp, ChainPolicy::Lsq, ChainPolicy::Sed];

    pub fn name(self) -> &'static str {
        match self {
            ChainPolicy::Ecmp => "ECMP",
            ChainPolicy::Wcmp => "WCMP",
            ChainPolicy::Lsq => "LSQ",
            ChainPolicy::Sed => "SED",
        }
    }
}

/// Per-timeslot probabilities of the two-server model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig<T> {
    pub queue_cap: usize,
    /// Observed arrival probability `λ`, routed by `policy`.
    pub observed_rate: T,
    /// Unobserved arrival probability `γ`, split evenly.
    pub unobserved_rate: T,
    pub service_rates: [T; 2],
    pub policy: ChainPolicy,
    /// Configured server weights used by WCMP and SED.
    pub weights: [T; 2],
}

impl<T: Float> ChainConfig<T> {
    pub fn validate(&self) -> Result<(), ChainError> {
        let rates = [
            self.observed_rate,
            self.unobserved_rate,
            self.service_rates[0],
            self.service_rates[1],
        ];
        if rates.iter().any(|r| !r.is_finite() || *r < T::zero()) {
            return Err(ChainError::Invalid("rates must be finite and nonnegative".into()));
        }
        let total = rates.iter().fold(T::zero(), |a, &r| a + r);
        let slack = T::from(1e-12).unwrap();
        if total > T::one() + slack {
            return Err(ChainError::RateBudget(total.to_f64().unwrap_or(f64::NAN)));
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w <= T::zero()) {
            return Err(ChainError::Invalid("weights must be positive".into()));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        (self.queue_cap + 1) * (self.queue_cap + 1)
    }

    pub fn index(&self, l1: usize, l2: usize) -> usize {
        l1 * (self.queue_cap + 1) + l2
    }

    pub fn state(&self, idx: usize) -> (usize, usize) {
        (idx / (self.queue_cap + 1), idx % (self.queue_cap + 1))
    }

    /// Probability that the observed arrival goes to server 1 in state `(l1, l2)`.
    fn route_first(&self, l1: usize, l2: usize) -> T {
        let half = T::from(0.5).unwrap();
        let pick = |a: T, b: T| {
            if a < b {
                T::one()
            } else if b < a {
                T::zero()
            } else {
                half
            }
        };
        match self.policy {
            ChainPolicy::Ecmp => half,
            ChainPolicy::Wcmp => self.weights[0] / (self.weights[0] + self.weights[1]),
            ChainPolicy::Lsq => pick(T::from(l1).unwrap(), T::from(l2).unwrap()),
            ChainPolicy::Sed => pick(
                (T::from(l1).unwrap() + T::one()) / self.weights[0],
                (T::from(l2).unwrap() + T::one()) / self.weights[1],
            ),
        }
    }
}

/// Sparse row-stochastic operator; row `s` lists `(next_state, probability)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionOperator<T> {
    queue_cap: usize,
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Float> TransitionOperator<T> {
    pub fn queue_cap(&self) -> usize {
        self.queue_cap
    }

    pub fn states(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, s: usize) -> &[(usize, T)] {
        &self.rows[s]
    }

    pub fn prob(&self, from: usize, to: usize) -> T {
        self.rows[from]
            .iter()
            .filter(|(d, _)| *d == to)
            .fold(T::zero(), |a, (_, p)| a + *p)
    }

    pub fn row_sum(&self, s: usize) -> T {
        self.rows[s].iter().fold(T::zero(), |a, (_, p)| a + *p)
    }

    /// One step `π' = π P`.
    pub fn apply(&self, dist: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|x| *x = T::zero());
        for (s, row) in self.rows.iter().enumerate() {
            let mass = dist[s];
            if mass == T::zero() {
                continue;
            }
            for &(d, p) in row {
                out[d] = out[d] + mass * p;
            }
        }
    }
}

pub fn build_transition<T: Float>(config: &ChainConfig<T>) -> Result<TransitionOperator<T>, ChainError> {
    config.validate()?;
    let q = config.queue_cap;
    let half = T::from(0.5).unwrap();
    let mut rows = Vec::with_capacity(config.states());
    for idx in 0..config.states() {
        let (l1, l2) = config.state(idx);
        let r1 = config.route_first(l1, l2);
        let arrive = [
            config.observed_rate * r1 + config.unobserved_rate * half,
            config.observed_rate * (T::one() - r1) + config.unobserved_rate * half,
        ];
        let mut row: Vec<(usize, T)> = Vec::with_capacity(5);
        let mut stay = T::one();
        let mut push = |dest: usize, p: T, stay: &mut T| {
            if p > T::zero() {
                row.push((dest, p));
                *stay = *stay - p;
            }
        };
        // Arrivals into a full queue and departures from an empty one are self-loops.
        if l1 < q {
            push(config.index(l1 + 1, l2), arrive[0], &mut stay);
        }
        if l2 < q {
            push(config.index(l1, l2 + 1), arrive[1], &mut stay);
        }
        if l1 > 0 {
            push(config.index(l1 - 1, l2), config.service_rates[0], &mut stay);
        }
        if l2 > 0 {
            push(config.index(l1, l2 - 1), config.service_rates[1], &mut stay);
        }
        row.push((idx, stay.max(T::zero())));
        rows.push(row);
    }
    Ok(TransitionOperator { queue_cap: q, rows })
}

/// Probability mass over `(l_1, l_2) ∈ [0, Q]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDistribution<T> {
    pub queue_cap: usize,
    pub probs: Vec<T>,
}

impl<T: Float> ChainDistribution<T> {
    pub fn point_mass(queue_cap: usize, l1: usize, l2: usize) -> Self {
        let side = queue_cap + 1;
        let mut probs = vec![T::zero(); side * side];
        probs[l1 * side + l2] = T::one();
        Self { queue_cap, probs }
    }

    pub fn empty_system(queue_cap: usize) -> Self {
        Self::point_mass(queue_cap, 0, 0)
    }

    pub fn total(&self) -> T {
        self.probs.iter().fold(T::zero(), |a, &p| a + p)
    }

    pub fn get(&self, l1: usize, l2: usize) -> T {
        self.probs[l1 * (self.queue_cap + 1) + l2]
    }

    /// Marginal distribution of one server's queue length.
    pub fn marginal(&self, server: usize) -> Vec<T> {
        let side = self.queue_cap + 1;
        let mut m = vec![T::zero(); side];
        for (idx, &p) in self.probs.iter().enumerate() {
            let l = if server == 0 { idx / side } else { idx % side };
            m[l] = m[l] + p;
        }
        m
    }
}

/// Power iteration from `initial` until the L1 change drops below `tolerance`.
pub fn stationary<T: Float>(
    op: &TransitionOperator<T>,
    initial: &ChainDistribution<T>,
    tolerance: T,
    max_iterations: usize,
) -> Result<ChainDistribution<T>, ChainError> {
    if initial.probs.len() != op.states() {
        return Err(ChainError::Invalid("distribution does not match operator".into()));
    }
    let mut cur = initial.probs.clone();
    let mut next = vec![T::zero(); cur.len()];
    let mut residual = T::infinity();
    for _ in 0..max_iterations {
        op.apply(&cur, &mut next);
        residual = cur
            .iter()
            .zip(&next)
            .fold(T::zero(), |a, (&x, &y)| a + (x - y).abs());
        std::mem::swap(&mut cur, &mut next);
        if residual < tolerance {
            return Ok(ChainDistribution {
                queue_cap: op.queue_cap(),
                probs: cur,
            });
        }
    }
    Err(ChainError::NotConverged {
        iterations: max_iterations,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Expectation of `Σ_i (l_i / (l_1 + l_2)) · (l_i / μ_i)`; the empty state contributes 0.
pub fn weighted_service_duration<T: Float>(dist: &ChainDistribution<T>, service_rates: [T; 2]) -> T {
    let side = dist.queue_cap + 1;
    let mut acc = T::zero();
    for (idx, &p) in dist.probs.iter().enumerate() {
        if p == T::zero() {
            continue;
        }
        let l = [idx / side, idx % side].map(|x| T::from(x).unwrap());
        let n = l[0] + l[1];
        if n == T::zero() {
            continue;
        }
        let mut v = T::zero();
        for i in 0..2 {
            if l[i] > T::zero() {
                v = v + (l[i] / n) * (l[i] / service_rates[i]);
            }
        }
        acc = acc + p * v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(policy: ChainPolicy, lambda: f64, gamma: f64, v: [f64; 2], w: [f64; 2], q: usize) -> ChainConfig<f64> {
        ChainConfig {
            queue_cap: q,
            observed_rate: lambda,
            unobserved_rate: gamma,
            service_rates: v,
            policy,
            weights: w,
        }
    }

    #[test]
    fn zero_rates_give_identity() {
        let c = cfg(ChainPolicy::Ecmp, 0.0, 0.0, [0.0, 0.0], [1.0, 1.0], 4);
        let op = build_transition(&c).unwrap();
        for s in 0..op.states() {
            assert_eq!(op.row(s), &[(s, 1.0)]);
        }
        let init = ChainDistribution::point_mass(4, 2, 3);
        let st = stationary(&op, &init, 1e-10, 10).unwrap();
        assert_eq!(st, init);
    }

    #[test]
    fn budget_violation_is_rejected() {
        let c = cfg(ChainPolicy::Ecmp, 0.5, 0.2, [0.3, 0.2], [1.0, 1.0], 4);
        assert!(matches!(build_transition(&c), Err(ChainError::RateBudget(_))));
    }

    #[test]
    fn symmetric_ecmp_commutes_with_swap() {
        let c = cfg(ChainPolicy::Ecmp, 0.2, 0.1, [0.15, 0.15], [2.0, 1.0], 6);
        let op = build_transition(&c).unwrap();
        for s in 0..op.states() {
            let (a, b) = c.state(s);
            for t in 0..op.states() {
                let (x, y) = c.state(t);
                assert_eq!(op.prob(s, t), op.prob(c.index(b, a), c.index(y, x)));
            }
        }
        let st = stationary(&op, &ChainDistribution::empty_system(6), 1e-12, DEFAULT_MAX_ITERATIONS).unwrap();
        let (m1, m2) = (st.marginal(0), st.marginal(1));
        for (a, b) in m1.iter().zip(&m2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn marginal_matches_birth_death_closed_form() {
        // State-independent routing decouples the servers; each marginal is a
        // discrete-time M/M/1/Q chain with a truncated geometric law.
        let q = 12;
        let c = cfg(ChainPolicy::Wcmp, 0.3, 0.1, [0.3, 0.2], [2.0, 1.0], q);
        let op = build_transition(&c).unwrap();
        let st = stationary(&op, &ChainDistribution::empty_system(q), 1e-13, DEFAULT_MAX_ITERATIONS).unwrap();
        let births = [0.3 * 2.0 / 3.0 + 0.05, 0.3 / 3.0 + 0.05];
        for server in 0..2 {
            let rho: f64 = births[server] / c.service_rates[server];
            let norm: f64 = (0..=q).map(|l| rho.powi(l as i32)).sum();
            for (l, p) in st.marginal(server).iter().enumerate() {
                let expected = rho.powi(l as i32) / norm;
                assert!((p - expected).abs() < 1e-8, "server {server} l={l}: {p} vs {expected}");
            }
        }
    }

    #[test]
    fn weighted_duration_examples() {
        let d = ChainDistribution::<f64>::empty_system(3);
        assert_eq!(weighted_service_duration(&d, [1.0, 1.0]), 0.0);
        let d = ChainDistribution::<f64>::point_mass(3, 2, 0);
        assert_eq!(weighted_service_duration(&d, [1.0, 1.0]), 2.0);
        let d = ChainDistribution::<f64>::point_mass(3, 1, 1);
        assert!((weighted_service_duration(&d, [2.0, 1.0]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn lsq_routes_to_shorter_queue() {
        let c = cfg(ChainPolicy::Lsq, 0.4, 0.0, [0.1, 0.1], [1.0, 1.0], 3);
        let op = build_transition(&c).unwrap();
        assert!((op.prob(c.index(2, 0), c.index(2, 1)) - 0.4).abs() < 1e-15);
        assert_eq!(op.prob(c.index(2, 0), c.index(3, 0)), 0.0);
        assert!((op.prob(c.index(1, 1), c.index(2, 1)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn sed_weighs_by_speed() {
        let c = cfg(ChainPolicy::Sed, 0.4, 0.0, [0.2, 0.1], [2.0, 1.0], 5);
        let op = build_transition(&c).unwrap();
        // (1+1)/2 = 1 < (0+1)/1 = 1 is a tie; (0+1)/2 < (0+1)/1 is not.
        assert!((op.prob(c.index(0, 0), c.index(1, 0)) - 0.4).abs() < 1e-15);
        assert!((op.prob(c.index(1, 0), c.index(2, 0)) - 0.2).abs() < 1e-15);
    }
}
