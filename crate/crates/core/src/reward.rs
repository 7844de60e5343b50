use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::fairness::{FairnessKind, FairnessScore};
use crate::load::LoadVector;
use crate::scalar::Scalar;

/// Offset inside the log-variance reward, `−log(var + ε_log)`.
pub const DEFAULT_LOG_EPSILON: f64 = 1e-8;

/// Per-step reward of one agent from its per-server duration vector `l_i`.
///
/// Larger is better for every kind: makespan and CV are negated.
pub fn reward<T: Scalar + Float>(kind: FairnessKind, row: &[T], eps_log: T) -> Result<T> {
    if row.iter().any(|v| !Float::is_finite(*v)) {
        return Err(CoreError::InvalidValue("non-finite reward input".into()));
    }
    if !(eps_log > T::zero()) {
        return Err(CoreError::InvalidValue("log epsilon must be positive".into()));
    }
    let l = LoadVector::new(row.to_vec())?;
    let score = FairnessScore::evaluate(kind, &l, eps_log).value;
    Ok(match kind {
        FairnessKind::Ms | FairnessKind::Cv => -score,
        _ => score,
    })
}
