use std::collections::VecDeque;

use rand::Rng;

pub const DEFAULT_BUFFER_CAPACITY: usize = 3000;

/// `(a_{t−1}, o_t, a_t, r_t, o_{t+1})` with its position in the episode.
///
/// Actions are the raw squashed outputs in (−1, 1), before the simplex map.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub prev_action: Vec<f64>,
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub episode: u64,
    pub step: usize,
}

/// A contiguous run inside one episode: `burn_in` warm-up transitions
/// followed by the loss-bearing ones.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample<'a> {
    pub burn_in: usize,
    pub transitions: Vec<&'a TransitionRecord>,
}

impl SequenceSample<'_> {
    pub fn train_len(&self) -> usize {
        self.transitions.len() - self.burn_in
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    data: VecDeque<TransitionRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BufferError {
    #[error("transition field {field} has length {got}, expected {expected}")]
    Shape { field: &'static str, expected: usize, got: usize },
    #[error("non-finite reward {0}")]
    Reward(f64),
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            obs_dim,
            action_dim,
            data: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&TransitionRecord> {
        self.data.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.data.iter()
    }

    pub fn push(&mut self, t: TransitionRecord) -> Result<(), BufferError> {
        let checks = [
            ("prev_action", self.action_dim, t.prev_action.len()),
            ("observation", self.obs_dim, t.observation.len()),
            ("action", self.action_dim, t.action.len()),
            ("next_observation", self.obs_dim, t.next_observation.len()),
        ];
        for (field, expected, got) in checks {
            if expected != got {
                return Err(BufferError::Shape { field, expected, got });
            }
        }
        if !t.reward.is_finite() {
            return Err(BufferError::Reward(t.reward));
        }
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(t);
        Ok(())
    }

    fn contiguous(&self, i: usize) -> bool {
        let (a, b) = (&self.data[i - 1], &self.data[i]);
        a.episode == b.episode && a.step + 1 == b.step
    }

    /// Start indices `s` such that `s..s+len` lies inside one episode.
    pub fn valid_starts(&self, len: usize) -> Vec<usize> {
        let n = self.data.len();
        if len == 0 || n < len {
            return Vec::new();
        }
        // run[i] = length of the contiguous run ending at i
        let mut run = vec![1usize; n];
        for i in 1..n {
            if self.contiguous(i) {
                run[i] = run[i - 1] + 1;
            }
        }
        (len - 1..n).filter(|&e| run[e] >= len).map(|e| e + 1 - len).collect()
    }

    /// Samples `batch` sequences of `len` loss-bearing steps, each preceded
    /// by up to `burn_in` earlier steps of the same episode.
    pub fn sample_sequences<R: Rng + ?Sized>(
        &self,
        batch: usize,
        len: usize,
        burn_in: usize,
        rng: &mut R,
    ) -> Vec<SequenceSample<'_>> {
        let starts = self.valid_starts(len);
        if starts.is_empty() {
            return Vec::new();
        }
        (0..batch)
            .map(|_| {
                let s = starts[rng.gen_range(0..starts.len())];
                let mut b = s;
                while b > 0 && s - b < burn_in && self.contiguous(b) {
                    b -= 1;
                }
                SequenceSample {
                    burn_in: s - b,
                    transitions: (b..s + len).map(|i| &self.data[i]).collect(),
                }
            })
            .collect()
    }
}
