//! Makespan, variance-based fairness (VBF), product-based fairness (PBF),
//! coefficient of variation and the time-cumulative potential.
//!
//! All variances use the population (1/N) normalisation.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::load::{mean, LoadVector, PerAgentLoadMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FairnessKind {
    Vbf,
    Pbf,
    Cv,
    /// Makespan.
    Ms,
    LogVbf,
    VbfLogVbf,
}

impl FairnessKind {
    pub const ALL: [FairnessKind; 6] = [
        FairnessKind::Vbf,
        FairnessKind::Pbf,
        FairnessKind::Cv,
        FairnessKind::Ms,
        FairnessKind::LogVbf,
        FairnessKind::VbfLogVbf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FairnessKind::Vbf => "vbf",
            FairnessKind::Pbf => "pbf",
            FairnessKind::Cv => "cv",
            FairnessKind::Ms => "ms",
            FairnessKind::LogVbf => "log-vbf",
            FairnessKind::VbfLogVbf => "vbf-log-vbf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessScore<T> {
    pub kind: FairnessKind,
    pub value: T,
}

/// Eq. (1) inner term: `max_j l_j`.
pub fn makespan<T: Scalar>(l: &LoadVector<T>) -> Result<T> {
    if l.is_empty() {
        return Err(CoreError::Empty);
    }
    Ok(l.max())
}

fn neg_population_variance<T: Scalar>(values: &[T]) -> T {
    let m = mean(values);
    let ss = values.iter().fold(T::zero(), |acc, &v| {
        let d = v - m;
        acc + d * d
    });
    -(ss / T::from_count(values.len()))
}

/// Negative population variance of the loads. Always `<= 0`.
pub fn vbf<T: Scalar>(l: &LoadVector<T>) -> T {
    neg_population_variance(l.as_slice())
}

/// VBF of one agent's row `l_i` of the per-agent load matrix.
pub fn per_agent_vbf<T: Scalar>(row: &[T]) -> Result<T> {
    if row.is_empty() {
        return Err(CoreError::Empty);
    }
    Ok(neg_population_variance(row))
}

fn covariance<T: Scalar>(a: &[T], b: &[T]) -> T {
    let (ma, mb) = (mean(a), mean(b));
    let s = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - ma) * (y - mb));
    s / T::from_count(a.len())
}

/// Components of `F(a+b) = F(a) + F(b) − 2·cov(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbfDecomposition<T> {
    pub total: T,
    pub first: T,
    pub second: T,
    pub covariance: T,
}

impl<T: Scalar> VbfDecomposition<T> {
    /// `F(a) + F(b) − 2·cov − F(a+b)`; zero up to rounding.
    pub fn residual(&self) -> T {
        self.first + self.second - (self.covariance + self.covariance) - self.total
    }
}

pub fn vbf_decomposition<T: Scalar>(
    a: &LoadVector<T>,
    b: &LoadVector<T>,
) -> Result<VbfDecomposition<T>> {
    let sum = a.add(b)?;
    Ok(VbfDecomposition {
        total: vbf(&sum),
        first: vbf(a),
        second: vbf(b),
        covariance: covariance(a.as_slice(), b.as_slice()),
    })
}

/// Product of `l_j / max(l)`; defined as 1 for the all-zero vector.
pub fn pbf<T: Scalar>(l: &LoadVector<T>) -> T {
    let max = l.max();
    if max == T::zero() {
        return T::one();
    }
    l.as_slice()
        .iter()
        .fold(T::one(), |acc, &v| acc * (v / max))
}

/// Population standard deviation over mean; 0 when the mean is 0.
pub fn cv<T: Scalar + Float>(l: &LoadVector<T>) -> T {
    let m = l.mean();
    if m == T::zero() {
        return T::zero();
    }
    let var = -vbf(l);
    Float::sqrt(var) / m
}

/// Time-cumulative total fairness `Σ_t F(l(t))`.
pub fn potential<T: Scalar>(trajectory: &[LoadVector<T>]) -> Result<T> {
    if trajectory.is_empty() {
        return Err(CoreError::Empty);
    }
    Ok(trajectory.iter().fold(T::zero(), |acc, l| acc + vbf(l)))
}

/// Accounting of the potential in terms of per-agent VBF trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialDecomposition<T> {
    pub potential: T,
    /// `Σ_t F_i(l_i(t))` per agent.
    pub per_agent: Vec<T>,
    /// `Σ_t Σ_{i<k} cov(l_i(t), l_k(t))`.
    pub cross_covariance: T,
}

impl<T: Scalar> PotentialDecomposition<T> {
    /// `Σ_i per_agent − 2·cross_covariance`, which equals `potential`.
    pub fn reconstructed(&self) -> T {
        let s = self.per_agent.iter().fold(T::zero(), |acc, &v| acc + v);
        s - (self.cross_covariance + self.cross_covariance)
    }
}

pub fn potential_decomposition<T: Scalar>(
    trajectory: &[PerAgentLoadMatrix<T>],
) -> Result<PotentialDecomposition<T>> {
    let first = trajectory.first().ok_or(CoreError::Empty)?;
    let agents = first.agents();
    let mut per_agent = vec![T::zero(); agents];
    let mut cross = T::zero();
    let mut totals = Vec::with_capacity(trajectory.len());
    for m in trajectory {
        if m.agents() != agents || m.servers() != first.servers() {
            return Err(CoreError::LengthMismatch {
                expected: agents * first.servers(),
                got: m.agents() * m.servers(),
            });
        }
        for (i, acc) in per_agent.iter_mut().enumerate() {
            *acc = *acc + neg_population_variance(m.row(i));
        }
        for i in 0..agents {
            for k in i + 1..agents {
                cross = cross + covariance(m.row(i), m.row(k));
            }
        }
        totals.push(m.column_sums());
    }
    Ok(PotentialDecomposition {
        potential: potential(&totals)?,
        per_agent,
        cross_covariance: cross,
    })
}

impl<T: Scalar + Float> FairnessScore<T> {
    /// Score `l` under `kind`; log-based kinds use `ε_log` inside the log.
    pub fn evaluate(kind: FairnessKind, l: &LoadVector<T>, eps_log: T) -> Self {
        let var = -vbf(l);
        let value = match kind {
            FairnessKind::Vbf => -var,
            FairnessKind::Pbf => pbf(l),
            FairnessKind::Cv => cv(l),
            FairnessKind::Ms => l.max(),
            FairnessKind::LogVbf => -Float::ln(var + eps_log),
            FairnessKind::VbfLogVbf => -var - Float::ln(var + eps_log),
        };
        Self { kind, value }
    }
}
