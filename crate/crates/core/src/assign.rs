use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Weight floor `ε_a` enforced after normalisation.
pub const DEFAULT_ACTION_FLOOR: f64 = 1e-3;

/// Per-server weight vector `a_i` of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action<T> {
    pub agent: usize,
    weights: Vec<T>,
}

impl<T: Scalar> Action<T> {
    /// Wraps raw weights; every weight must be positive and finite.
    pub fn new(agent: usize, weights: Vec<T>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CoreError::Empty);
        }
        for &w in &weights {
            if !(w > T::zero()) || !w.to_f64_lossy().is_finite() {
                return Err(CoreError::InvalidValue(format!(
                    "action weight must be positive and finite, got {w:?}"
                )));
            }
        }
        Ok(Self { agent, weights })
    }

    pub fn uniform(agent: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoreError::Empty);
        }
        let w = T::one() / T::from_count(n);
        Ok(Self {
            agent,
            weights: vec![w; n],
        })
    }

    /// Normalises nonnegative raw weights to the simplex and lifts every entry
    /// to at least `floor`, renormalising afterwards.
    pub fn from_raw(agent: usize, raw: &[T], floor: T) -> Result<Self> {
        if raw.is_empty() {
            return Err(CoreError::Empty);
        }
        if raw
            .iter()
            .any(|&w| w < T::zero() || !w.to_f64_lossy().is_finite())
        {
            return Err(CoreError::InvalidValue("raw weights must be finite and >= 0".into()));
        }
        let n = T::from_count(raw.len());
        let total = raw.iter().fold(T::zero(), |a, &w| a + w);
        let normalized: Vec<T> = if total > T::zero() {
            raw.iter().map(|&w| w / total).collect()
        } else {
            vec![T::one() / n; raw.len()]
        };
        Self::new(agent, apply_floor(normalized, floor))
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Raises entries below `floor` to exactly `floor` and rescales the rest so
/// the total stays 1. Falls back to uniform when `floor · n >= 1`.
fn apply_floor<T: Scalar>(mut w: Vec<T>, floor: T) -> Vec<T> {
    let n = w.len();
    if floor * T::from_count(n) >= T::one() {
        return vec![T::one() / T::from_count(n); n];
    }
    let mut pinned = vec![false; n];
    loop {
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        let free_mass = T::one() - floor * T::from_count(pinned_count);
        let free_total = w
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .fold(T::zero(), |a, (&v, _)| a + v);
        let mut changed = false;
        for (v, p) in w.iter_mut().zip(pinned.iter_mut()) {
            if *p {
                *v = floor;
                continue;
            }
            *v = *v * free_mass / free_total;
            if *v < floor {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            return w;
        }
    }
}

/// Data-plane server choice `argmin_k (q_k + 1) / a_k`, lowest index on ties.
pub fn assign_server<T: Scalar>(q: &[u32], action: &Action<T>) -> Result<usize> {
    if q.len() != action.len() {
        return Err(CoreError::LengthMismatch {
            expected: action.len(),
            got: q.len(),
        });
    }
    let mut best = 0;
    let mut best_score = None;
    for (k, (&qk, &ak)) in q.iter().zip(action.weights()).enumerate() {
        let score = T::from_u32(qk + 1).expect("count representable") / ak;
        match best_score {
            Some(b) if !(score < b) => {}
            _ => {
                best = k;
                best_score = Some(score);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(w: &[f64]) -> Action<f64> {
        Action::new(0, w.to_vec()).unwrap()
    }

    #[test]
    fn assign_examples() {
        assert_eq!(assign_server(&[0, 0], &act(&[0.3, 0.7])).unwrap(), 1);
        assert_eq!(assign_server(&[4, 1], &act(&[0.5, 0.5])).unwrap(), 1);
        assert_eq!(assign_server(&[1, 1], &act(&[0.5, 0.5])).unwrap(), 0);
    }

    #[test]
    fn assign_length_mismatch() {
        assert!(assign_server(&[1, 1, 1], &act(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(Action::new(0, vec![1.0, 0.0]).is_err());
        assert!(Action::new(0, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn floor_is_enforced() {
        let a = Action::from_raw(0, &[0.0, 1.0, 1.0], 1e-3).unwrap();
        let sum: f64 = a.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((a.weights()[0] - 1e-3).abs() < 1e-15);
        assert!((a.weights()[1] - 0.4995).abs() < 1e-12);
        let u = Action::from_raw(0, &[0.0, 0.0], 1e-3).unwrap();
        assert_eq!(u.weights(), &[0.5, 0.5]);
    }
}
