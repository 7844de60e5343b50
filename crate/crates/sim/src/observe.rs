//! Reservoir sampling and the 5-scalar feature reduction.

use rand::RngCore;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESERVOIR_SIZE: usize = 16;
pub const DEFAULT_FEATURE_DISCOUNT: f64 = 0.9;
pub const STATS_PER_CHANNEL: usize = 5;

/// Fixed-size sample buffer overwritten at a uniformly random slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirBuffer {
    slots: Vec<Option<(f64, f64)>>,
    filled: usize,
}

impl ReservoirBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "reservoir capacity must be positive");
        Self {
            slots: vec![None; capacity],
            filled: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.filled
    }

    pub fn is_empty(&self) -> bool {
        self.filled == 0
    }

    /// Overwrites slot `rand % k` and returns the slot index.
    pub fn insert<R: RngCore + ?Sized>(&mut self, t: f64, v: f64, rng: &mut R) -> usize {
        let idx = (rng.next_u64() % self.slots.len() as u64) as usize;
        if self.slots[idx].is_none() {
            self.filled += 1;
        }
        self.slots[idx] = Some((t, v));
        idx
    }

    pub fn slot(&self, idx: usize) -> Option<(f64, f64)> {
        self.slots.get(idx).copied().flatten()
    }

    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.slots.iter().flatten().copied().collect()
    }
}

/// `(mean, p90, std, discounted avg, time-weighted discounted avg)`.
pub fn reduce_stats(samples: &[(f64, f64)], now: f64, discount: f64) -> [f64; 5] {
    if samples.is_empty() {
        return [0.0; 5];
    }
    let n = samples.len() as f64;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mean = sorted.iter().map(|s| s.1).sum::<f64>() / n;
    let var = sorted.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / n;

    let mut values: Vec<f64> = sorted.iter().map(|s| s.1).collect();
    values.sort_by(f64::total_cmp);
    let rank = (0.9 * n).ceil().max(1.0) as usize;
    let p90 = values[rank - 1];

    let weights: Vec<f64> = sorted.iter().map(|s| discount.powf((now - s.0).max(0.0))).collect();
    let wsum: f64 = weights.iter().sum();
    let disc = sorted.iter().zip(&weights).map(|(s, w)| w * s.1).sum::<f64>() / wsum;

    let gaps: Vec<f64> = (0..sorted.len())
        .map(|i| match i {
            0 if sorted.len() > 1 => sorted[1].0 - sorted[0].0,
            0 => 1.0,
            _ => sorted[i].0 - sorted[i - 1].0,
        })
        .collect();
    let tw: f64 = weights.iter().zip(&gaps).map(|(w, g)| w * g).sum();
    let weighted = if tw > 0.0 {
        sorted
            .iter()
            .zip(weights.iter().zip(&gaps))
            .map(|(s, (w, g))| w * g * s.1)
            .sum::<f64>()
            / tw
    } else {
        disc
    };
    [mean, p90, var.sqrt(), disc, weighted]
}

/// Everything an agent measures locally.
#[derive(Debug, Clone)]
pub struct AgentChannels {
    pub duration: Vec<ReservoirBuffer>,
    pub completion: Vec<ReservoirBuffer>,
    pub inter_arrival: ReservoirBuffer,
}

impl AgentChannels {
    pub fn new(servers: usize, k: usize) -> Self {
        Self {
            duration: (0..servers).map(|_| ReservoirBuffer::new(k)).collect(),
            completion: (0..servers).map(|_| ReservoirBuffer::new(k)).collect(),
            inter_arrival: ReservoirBuffer::new(k),
        }
    }

    pub fn servers(&self) -> usize {
        self.duration.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationScales {
    /// Multipliers for the ongoing-task counts, `1/p̂_j`.
    pub count: Vec<f64>,
    /// Divisor for every time statistic.
    pub time: f64,
    pub discount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub servers: usize,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dimension(servers: usize) -> usize {
        servers * (1 + 2 * STATS_PER_CHANNEL) + STATS_PER_CHANNEL + servers
    }

    /// Scaled ongoing-task count of server `j`.
    pub fn count(&self, j: usize) -> f64 {
        self.values[j * 11]
    }

    pub fn duration_stats(&self, j: usize) -> &[f64] {
        &self.values[j * 11 + 1..j * 11 + 6]
    }

    pub fn completion_stats(&self, j: usize) -> &[f64] {
        &self.values[j * 11 + 6..j * 11 + 11]
    }

    pub fn inter_arrival_stats(&self) -> &[f64] {
        &self.values[self.servers * 11..self.servers * 11 + 5]
    }

    pub fn prev_action(&self) -> &[f64] {
        &self.values[self.servers * 11 + 5..]
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ObservationError {
    #[error("observation dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite observation entry at {0}")]
    NonFinite(usize),
}

pub fn build_observation(
    channels: &AgentChannels,
    q: &[u32],
    now: f64,
    prev_action: &[f64],
    scales: &ObservationScales,
) -> Result<FeatureVector, ObservationError> {
    let n = channels.servers();
    for len in [q.len(), prev_action.len(), scales.count.len()] {
        if len != n {
            return Err(ObservationError::Dimension { expected: n, got: len });
        }
    }
    let mut values = Vec::with_capacity(FeatureVector::dimension(n));
    let push_stats = |values: &mut Vec<f64>, buf: &ReservoirBuffer| {
        let s = reduce_stats(&buf.samples(), now, scales.discount);
        values.extend(s.iter().map(|x| x / scales.time));
    };
    for j in 0..n {
        values.push(f64::from(q[j]) * scales.count[j]);
        push_stats(&mut values, &channels.duration[j]);
        push_stats(&mut values, &channels.completion[j]);
    }
    push_stats(&mut values, &channels.inter_arrival);
    values.extend_from_slice(prev_action);
    let expected = FeatureVector::dimension(n);
    if values.len() != expected {
        return Err(ObservationError::Dimension { expected, got: values.len() });
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(ObservationError::NonFinite(i));
    }
    Ok(FeatureVector { servers: n, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn k1_holds_latest() {
        let mut rng = stream(0, "reservoir", 0);
        let mut b = ReservoirBuffer::new(1);
        for i in 0..10 {
            b.insert(i as f64, i as f64 * 2.0, &mut rng);
            assert_eq!(b.samples(), vec![(i as f64, i as f64 * 2.0)]);
        }
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce_stats(&[(0.0, 2.0)], 0.0, 0.9), [2.0, 2.0, 0.0, 2.0, 2.0]);
        let s = reduce_stats(&[(0.0, 1.0), (1.0, 3.0)], 1.0, 0.9);
        assert!((s[3] - (0.9 + 3.0) / 1.9).abs() < 1e-12);
        assert!((s[3] - 2.0526).abs() < 1e-4);
        assert_eq!(reduce_stats(&[], 3.0, 0.9), [0.0; 5]);
    }

    #[test]
    fn nearest_rank_p90() {
        let samples: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64, i as f64)).collect();
        assert_eq!(reduce_stats(&samples, 10.0, 0.9)[1], 9.0);
        let samples: Vec<(f64, f64)> = (1..=11).map(|i| (0.0, i as f64)).collect();
        assert_eq!(reduce_stats(&samples, 0.0, 0.9)[1], 10.0);
    }

    #[test]
    fn cold_start_layout() {
        let ch = AgentChannels::new(8, 16);
        let scales = ObservationScales {
            count: vec![1.0; 8],
            time: 1.0,
            discount: 0.9,
        };
        let prev = vec![1.0 / 8.0; 8];
        let f = build_observation(&ch, &[0; 8], 0.0, &prev, &scales).unwrap();
        assert_eq!(f.values.len(), 101);
        assert!(f.values[..93].iter().all(|&v| v == 0.0));
        assert_eq!(f.prev_action(), &prev[..]);
        assert!(build_observation(&ch, &[0; 7], 0.0, &prev, &scales).is_err());
    }
}
