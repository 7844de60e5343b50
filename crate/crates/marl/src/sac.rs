use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use lbgame_nn::{squashed_backward, squashed_from_noise, Real, Result};

use crate::buffer::SequenceSample;
use crate::nets::{Actor, CriticSet, EncoderStep};

/// A sampled sequence converted to network inputs.
///
/// `inputs[k] = [o_k, a_{k−1}]` for `k ≤ len`; the last entry is built from
/// the final transition's next observation and action.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T> {
    pub inputs: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
    pub rewards: Vec<T>,
    pub burn_in: usize,
}

impl<T: Real> Sequence<T> {
    pub fn from_sample(s: &SequenceSample<'_>) -> Self {
        let conv = |v: &[f64]| v.iter().map(|&x| T::c(x)).collect::<Vec<T>>();
        let cat = |o: &[f64], a: &[f64]| o.iter().chain(a).map(|&x| T::c(x)).collect::<Vec<T>>();
        let mut inputs: Vec<Vec<T>> = s.transitions.iter().map(|t| cat(&t.observation, &t.prev_action)).collect();
        let last = s.transitions.last().expect("nonempty sequence");
        inputs.push(cat(&last.next_observation, &last.action));
        Self {
            inputs,
            actions: s.transitions.iter().map(|t| conv(&t.action)).collect(),
            rewards: s.transitions.iter().map(|t| T::c(t.reward)).collect(),
            burn_in: s.burn_in,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn train_steps(&self) -> std::ops::Range<usize> {
        self.burn_in..self.len()
    }
}

/// Standard-normal draws per sequence, per step (`len + 1` steps).
pub type NoiseTable<T> = Vec<Vec<Vec<T>>>;

pub fn draw_noise<T: Real, R: Rng + ?Sized>(batch: &[Sequence<T>], dim: usize, rng: &mut R) -> NoiseTable<T> {
    batch
        .iter()
        .map(|s| {
            (0..=s.len())
                .map(|_| (0..dim).map(|_| T::c(StandardNormal.sample(rng))).collect())
                .collect()
        })
        .collect()
}

fn train_count<T: Real>(batch: &[Sequence<T>]) -> usize {
    batch.iter().map(|s| s.len() - s.burn_in).sum()
}

fn unroll_encoder<T: Real>(
    enc: &crate::nets::Encoder<T>,
    inputs: &[Vec<T>],
) -> Result<Vec<EncoderStep<T>>> {
    let mut h = vec![T::zero(); enc.hidden_dim()];
    let mut steps = Vec::with_capacity(inputs.len());
    for x in inputs {
        let st = enc.step(x, &h)?;
        h = st.h.clone();
        steps.push(st);
    }
    Ok(steps)
}

/// Hyperparameters entering the critic target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetParams<T> {
    pub gamma: T,
    pub alpha: T,
    pub reward_scale: T,
}

/// Soft Bellman targets `r + γ(min_k Q̃_k(o′, a′) − α log π(a′|o′))`, one per loss-bearing step.
pub fn critic_targets<T: Real>(
    targets: &CriticSet<T>,
    actor: &Actor<T>,
    p: TargetParams<T>,
    batch: &[Sequence<T>],
    noise: &NoiseTable<T>,
) -> Result<Vec<Vec<T>>> {
    let mut out = Vec::with_capacity(batch.len());
    for (s, nz) in batch.iter().zip(noise) {
        let mut h = vec![T::zero(); actor.encoder.hidden_dim()];
        let mut next = Vec::with_capacity(s.len() + 1);
        for (k, x) in s.inputs.iter().enumerate() {
            let st = actor.step(x, &h)?;
            h = st.enc.h.clone();
            if k > s.burn_in {
                next.push(squashed_from_noise(&st.mean, &st.log_std, &nz[k])?);
            }
        }
        let enc: Vec<Vec<EncoderStep<T>>> = targets
            .critics
            .iter()
            .map(|c| unroll_encoder(&c.encoder, &s.inputs))
            .collect::<Result<_>>()?;
        let mut ys = Vec::with_capacity(s.len() - s.burn_in);
        for k in s.train_steps() {
            let a = &next[k - s.burn_in];
            let mut qmin = T::infinity();
            for (c, e) in targets.critics.iter().zip(&enc) {
                qmin = qmin.min(c.q(&e[k + 1].h, &a.action)?.q);
            }
            ys.push(p.reward_scale * s.rewards[k] + p.gamma * (qmin - p.alpha * a.log_prob));
        }
        out.push(ys);
    }
    Ok(out)
}

/// Mean squared TD error over critics and loss-bearing steps against fixed `ys`.
pub fn critic_regression<T: Real>(
    critics: &mut CriticSet<T>,
    batch: &[Sequence<T>],
    ys: &[Vec<T>],
    backward: bool,
) -> Result<T> {
    let count = train_count(batch);
    if count == 0 || critics.critics.is_empty() {
        return Ok(T::zero());
    }
    let norm = T::c((count * critics.critics.len()) as f64);
    let mut loss = T::zero();
    for critic in critics.critics.iter_mut() {
        for (s, y) in batch.iter().zip(ys) {
            let steps = unroll_encoder(&critic.encoder, &s.inputs[..s.len()])?;
            let mut dh_head = Vec::with_capacity(s.len() - s.burn_in);
            for k in s.train_steps() {
                let qs = critic.q(&steps[k].h, &s.actions[k])?;
                let err = qs.q - y[k - s.burn_in];
                loss = loss + err * err / norm;
                if backward {
                    dh_head.push(critic.q_backward(&qs, T::c(2.0) * err / norm)?.0);
                }
            }
            if backward {
                let mut carry = vec![T::zero(); critic.encoder.hidden_dim()];
                for k in s.train_steps().rev() {
                    let dh: Vec<T> = carry.iter().zip(&dh_head[k - s.burn_in]).map(|(&a, &b)| a + b).collect();
                    carry = critic.encoder.backward(&steps[k], &dh)?;
                }
            }
        }
    }
    Ok(loss)
}

/// `E[α log π(ã|o) − min_k Q_k(o, ã)]` with `ã` reparameterised from `noise`.
/// Returns `(loss, mean log π)`; gradients flow into the actor only.
pub fn actor_objective<T: Real>(
    actor: &mut Actor<T>,
    critics: &CriticSet<T>,
    alpha: T,
    batch: &[Sequence<T>],
    noise: &NoiseTable<T>,
    backward: bool,
) -> Result<(T, T)> {
    let count = train_count(batch);
    if count == 0 {
        return Ok((T::zero(), T::zero()));
    }
    let norm = T::c(count as f64);
    let (mut loss, mut logp_sum) = (T::zero(), T::zero());
    for (s, nz) in batch.iter().zip(noise) {
        let mut h = vec![T::zero(); actor.encoder.hidden_dim()];
        let mut steps = Vec::with_capacity(s.len());
        for x in &s.inputs[..s.len()] {
            let st = actor.step(x, &h)?;
            h = st.enc.h.clone();
            steps.push(st);
        }
        let enc: Vec<Vec<EncoderStep<T>>> = critics
            .critics
            .iter()
            .map(|c| unroll_encoder(&c.encoder, &s.inputs[..s.len()]))
            .collect::<Result<_>>()?;
        let mut grads = Vec::with_capacity(s.len() - s.burn_in);
        for k in s.train_steps() {
            let sample = squashed_from_noise(&steps[k].mean, &steps[k].log_std, &nz[k])?;
            let mut best: Option<(T, usize, crate::nets::QStep<T>)> = None;
            for (j, (c, e)) in critics.critics.iter().zip(&enc).enumerate() {
                let qs = c.q(&e[k].h, &sample.action)?;
                if best.as_ref().map_or(true, |b| qs.q < b.0) {
                    best = Some((qs.q, j, qs));
                }
            }
            let (qmin, j, qs) = best.expect("at least one critic");
            loss = loss + (alpha * sample.log_prob - qmin) / norm;
            logp_sum = logp_sum + sample.log_prob;
            if backward {
                let da: Vec<T> = critics.critics[j].action_grad(&qs).iter().map(|&g| -g / norm).collect();
                grads.push(squashed_backward(&sample, &da, alpha / norm)?);
            }
        }
        if backward {
            let mut carry = vec![T::zero(); actor.encoder.hidden_dim()];
            for k in s.train_steps().rev() {
                let (dm, ds) = &grads[k - s.burn_in];
                carry = actor.backward(&steps[k], dm, ds, &carry)?;
            }
        }
    }
    Ok((loss, logp_sum / norm))
}

/// Mean log-probability of fresh policy samples at the loss-bearing steps.
pub fn mean_log_prob<T: Real>(actor: &Actor<T>, batch: &[Sequence<T>], noise: &NoiseTable<T>) -> Result<T> {
    let count = train_count(batch);
    if count == 0 {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for (s, nz) in batch.iter().zip(noise) {
        let mut h = vec![T::zero(); actor.encoder.hidden_dim()];
        for k in 0..s.len() {
            let st = actor.step(&s.inputs[k], &h)?;
            h = st.enc.h.clone();
            if k >= s.burn_in {
                sum = sum + squashed_from_noise(&st.mean, &st.log_std, &nz[k])?.log_prob;
            }
        }
    }
    Ok(sum / T::c(count as f64))
}
