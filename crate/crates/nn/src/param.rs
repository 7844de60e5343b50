use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    Shape {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, NnError>;

pub(crate) fn check_len(context: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(NnError::Shape {
            context: context.to_string(),
            expected: vec![expected],
            got: vec![got],
        });
    }
    Ok(())
}

/// A named parameter tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
}

impl<T: Real> Param<T> {
    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            value: vec![T::zero(); n],
            grad: vec![T::zero(); n],
        }
    }

    pub fn from_values(name: impl Into<String>, shape: &[usize], value: Vec<T>) -> Result<Self> {
        let mut p = Self::zeros(name, shape);
        check_len(&p.name, p.value.len(), value.len())?;
        p.value = value;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn grads_finite(&self) -> bool {
        self.grad.iter().all(|g| g.is_finite())
    }
}

/// Anything that owns parameters.
pub trait Module<T: Real> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

/// `target ← (1−τ)·target + τ·source`, elementwise over every tensor.
pub fn soft_update<T: Real, M: Module<T>>(target: &mut M, source: &M, tau: T) -> Result<()> {
    if !(tau > T::zero() && tau <= T::one()) {
        return Err(NnError::Invalid(format!("tau must be in (0, 1], got {tau:?}")));
    }
    let src = source.params();
    let mut dst = target.params_mut();
    check_len("soft_update tensor count", src.len(), dst.len())?;
    for (d, s) in dst.iter_mut().zip(&src) {
        if d.shape != s.shape {
            return Err(NnError::Shape {
                context: format!("soft_update {}", d.name),
                expected: d.shape.clone(),
                got: s.shape.clone(),
            });
        }
        for (x, &y) in d.value.iter_mut().zip(&s.value) {
            *x = (T::one() - tau) * *x + tau * y;
        }
    }
    Ok(())
}

/// Copies all parameter values.
pub fn hard_update<T: Real, M: Module<T>>(target: &mut M, source: &M) -> Result<()> {
    soft_update(target, source, T::one())
}
