use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::real::Real;

/// Uniform on `±1/sqrt(fan_in)`.
pub fn fan_in_uniform<T: Real, R: Rng + ?Sized>(rng: &mut R, fan_in: usize, n: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..n).map(|_| T::c(rng.gen_range(-bound..=bound))).collect()
}

/// Random `n×n` orthogonal matrix, row-major, via Gram-Schmidt on Gaussian rows.
pub fn orthogonal<T: Real, R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<T> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            rows.push(v);
        }
    }
    rows.into_iter().flatten().map(T::c).collect()
}
