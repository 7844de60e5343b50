use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::param::{check_len, Result};
use crate::real::{softplus, Real};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// A reparameterised draw `a = tanh(mean + exp(log_std)·ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquashedSample<T> {
    pub noise: Vec<T>,
    pub pre_tanh: Vec<T>,
    pub action: Vec<T>,
    pub log_prob: T,
    std: Vec<T>,
    clamped: Vec<bool>,
}

/// `ln(1 − tanh(u)²)` computed without cancellation.
pub fn log_one_minus_tanh_sq<T: Real>(u: T) -> T {
    T::c(2.0) * (T::c(std::f64::consts::LN_2) - u - softplus(T::c(-2.0) * u))
}

pub fn squashed_from_noise<T: Real>(mean: &[T], log_std: &[T], noise: &[T]) -> Result<SquashedSample<T>> {
    check_len("gaussian log_std", mean.len(), log_std.len())?;
    check_len("gaussian noise", mean.len(), noise.len())?;
    let (lo, hi) = (T::c(LOG_STD_MIN), T::c(LOG_STD_MAX));
    let half_ln_2pi = T::c(0.5 * (2.0 * std::f64::consts::PI).ln());
    let mut out = SquashedSample {
        noise: noise.to_vec(),
        pre_tanh: Vec::with_capacity(mean.len()),
        action: Vec::with_capacity(mean.len()),
        log_prob: T::zero(),
        std: Vec::with_capacity(mean.len()),
        clamped: Vec::with_capacity(mean.len()),
    };
    for k in 0..mean.len() {
        let ls = log_std[k].max(lo).min(hi);
        let s = ls.exp();
        let u = mean[k] + s * noise[k];
        out.log_prob = out.log_prob - T::c(0.5) * noise[k] * noise[k] - ls - half_ln_2pi - log_one_minus_tanh_sq(u);
        out.pre_tanh.push(u);
        out.action.push(u.tanh());
        out.std.push(s);
        out.clamped.push(log_std[k] < lo || log_std[k] > hi);
    }
    Ok(out)
}

pub fn gaussian_head_sample<T: Real, R: Rng + ?Sized>(
    mean: &[T],
    log_std: &[T],
    rng: &mut R,
) -> Result<SquashedSample<T>> {
    let noise: Vec<T> = (0..mean.len())
        .map(|_| T::c(StandardNormal.sample(rng)))
        .collect();
    squashed_from_noise(mean, log_std, &noise)
}

/// The noiseless action `tanh(mean)`.
pub fn squashed_mean<T: Real>(mean: &[T]) -> Vec<T> {
    mean.iter().map(|m| m.tanh()).collect()
}

/// Gradients w.r.t. `(mean, log_std)` given upstream `dL/da` and `dL/dlog_prob`.
pub fn squashed_backward<T: Real>(s: &SquashedSample<T>, d_action: &[T], d_log_prob: T) -> Result<(Vec<T>, Vec<T>)> {
    check_len("gaussian grad", s.action.len(), d_action.len())?;
    let two = T::c(2.0);
    let mut d_mean = Vec::with_capacity(s.action.len());
    let mut d_log_std = Vec::with_capacity(s.action.len());
    for k in 0..s.action.len() {
        let a = s.action[k];
        let du = d_action[k] * (T::one() - a * a) + d_log_prob * two * a;
        d_mean.push(du);
        d_log_std.push(if s.clamped[k] {
            T::zero()
        } else {
            du * s.std[k] * s.noise[k] - d_log_prob
        });
    }
    Ok((d_mean, d_log_std))
}
