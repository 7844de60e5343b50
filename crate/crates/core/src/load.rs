use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// Static description of one backend server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub id: usize,
    /// Workload units processed per second by one CPU.
    pub processing_rate: f64,
    /// Number of processors `p_j`.
    pub cpu_count: u32,
    /// Maximum number of concurrently served CPU tasks `p̂_j`.
    pub cpu_cap: u32,
    #[serde(default = "default_true")]
    pub io_capable: bool,
}

fn default_true() -> bool {
    true
}

impl ServerSpec {
    pub fn new(id: usize, processing_rate: f64, cpu_count: u32, cpu_cap: u32) -> Result<Self> {
        let spec = Self {
            id,
            processing_rate,
            cpu_count,
            cpu_cap,
            io_capable: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.processing_rate.is_finite() && self.processing_rate > 0.0) {
            return Err(CoreError::InvalidValue(format!(
                "server {}: processing rate must be positive, got {}",
                self.id, self.processing_rate
            )));
        }
        if self.cpu_count == 0 || self.cpu_cap < self.cpu_count {
            return Err(CoreError::InvalidValue(format!(
                "server {}: need cpu_cap >= cpu_count >= 1, got cap {} count {}",
                self.id, self.cpu_cap, self.cpu_count
            )));
        }
        Ok(())
    }

    /// Nominal CPU throughput in workload units per second.
    pub fn nominal_capacity(&self) -> f64 {
        self.processing_rate * f64::from(self.cpu_count)
    }
}

/// Remaining time to process per server, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LoadVector<T> {
    values: Vec<T>,
}

pub(crate) fn check_entry<T: Scalar>(v: T) -> Result<()> {
    if v < T::zero() {
        return Err(CoreError::InvalidValue(format!("negative load {v:?}")));
    }
    if !v.to_f64_lossy().is_finite() {
        return Err(CoreError::InvalidValue(format!("non-finite load {v:?}")));
    }
    Ok(())
}

impl<T: Scalar> LoadVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::Empty);
        }
        for &v in &values {
            check_entry(v)?;
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![T::zero(); n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn mean(&self) -> T {
        mean(&self.values)
    }

    pub fn max(&self) -> T {
        self.values
            .iter()
            .copied()
            .fold(self.values[0], |acc, v| acc.max_of(v))
    }

    pub fn scaled(&self, c: T) -> Result<Self> {
        Self::new(self.values.iter().map(|&v| v * c).collect())
    }

    /// Element-wise sum of two vectors of equal length.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.len() != self.len() {
            return Err(CoreError::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + b)
                .collect(),
        })
    }
}

pub(crate) fn mean<T: Scalar>(values: &[T]) -> T {
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + v);
    sum / T::from_count(values.len())
}

/// Per-agent decomposition `l_ij` of the server loads; rows are agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerAgentLoadMatrix<T> {
    agents: usize,
    servers: usize,
    values: Vec<T>,
}

impl<T: Scalar> PerAgentLoadMatrix<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let agents = rows.len();
        if agents == 0 {
            return Err(CoreError::Empty);
        }
        let servers = rows[0].len();
        if servers == 0 {
            return Err(CoreError::Empty);
        }
        let mut values = Vec::with_capacity(agents * servers);
        for row in rows {
            if row.len() != servers {
                return Err(CoreError::LengthMismatch {
                    expected: servers,
                    got: row.len(),
                });
            }
            for &v in &row {
                check_entry(v)?;
            }
            values.extend(row);
        }
        Ok(Self {
            agents,
            servers,
            values,
        })
    }

    pub fn zeros(agents: usize, servers: usize) -> Result<Self> {
        Self::new(vec![vec![T::zero(); servers]; agents])
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn row(&self, agent: usize) -> &[T] {
        &self.values[agent * self.servers..(agent + 1) * self.servers]
    }

    pub fn get(&self, agent: usize, server: usize) -> T {
        self.values[agent * self.servers + server]
    }

    pub fn set(&mut self, agent: usize, server: usize, v: T) -> Result<()> {
        check_entry(v)?;
        self.values[agent * self.servers + server] = v;
        Ok(())
    }

    pub fn row_vector(&self, agent: usize) -> LoadVector<T> {
        LoadVector {
            values: self.row(agent).to_vec(),
        }
    }

    /// `l_j = Σ_i l_ij`.
    pub fn column_sums(&self) -> LoadVector<T> {
        let mut sums = vec![T::zero(); self.servers];
        for a in 0..self.agents {
            for (s, &v) in sums.iter_mut().zip(self.row(a)) {
                *s = *s + v;
            }
        }
        LoadVector { values: sums }
    }

    /// Total load of every agent except `agent`, per server (`l_{-i}`).
    pub fn others(&self, agent: usize) -> LoadVector<T> {
        let mut sums = vec![T::zero(); self.servers];
        for a in (0..self.agents).filter(|&a| a != agent) {
            for (s, &v) in sums.iter_mut().zip(self.row(a)) {
                *s = *s + v;
            }
        }
        LoadVector { values: sums }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_negative() {
        assert_eq!(LoadVector::<f64>::new(vec![]), Err(CoreError::Empty));
        assert!(LoadVector::new(vec![1.0, -0.5]).is_err());
        assert!(LoadVector::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn column_sums_match_rows() {
        let m = PerAgentLoadMatrix::new(vec![vec![1.0, 2.0], vec![0.5, 0.0]]).unwrap();
        assert_eq!(m.column_sums().as_slice(), &[1.5, 2.0]);
        assert_eq!(m.others(0).as_slice(), &[0.5, 0.0]);
    }

    #[test]
    fn server_spec_bounds() {
        assert!(ServerSpec::new(0, 1.0, 2, 4).is_ok());
        assert!(ServerSpec::new(0, 1.0, 2, 1).is_err());
        assert!(ServerSpec::new(0, 0.0, 1, 1).is_err());
        assert!(ServerSpec::new(0, 1.0, 0, 0).is_err());
    }
}
