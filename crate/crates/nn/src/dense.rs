use rand::Rng;

use crate::init::fan_in_uniform;
use crate::param::{check_len, Module, Param, Result};
use crate::real::Real;

/// `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Param<T>,
    pub b: Param<T>,
}

impl<T: Real> Dense<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        let mut w = Param::zeros(format!("{name}.w"), &[output, input]);
        w.value = fan_in_uniform(rng, input, output * input);
        Self {
            w,
            b: Param::zeros(format!("{name}.b"), &[output]),
        }
    }

    pub fn from_parts(name: &str, input: usize, output: usize, w: Vec<T>, b: Vec<T>) -> Result<Self> {
        Ok(Self {
            w: Param::from_values(format!("{name}.w"), &[output, input], w)?,
            b: Param::from_values(format!("{name}.b"), &[output], b)?,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w.shape[1]
    }

    pub fn output_dim(&self) -> usize {
        self.w.shape[0]
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let (out, inp) = (self.output_dim(), self.input_dim());
        check_len(&self.w.name, inp, x.len())?;
        Ok((0..out)
            .map(|o| {
                let row = &self.w.value[o * inp..(o + 1) * inp];
                row.iter().zip(x).fold(self.b.value[o], |acc, (&w, &xi)| acc + w * xi)
            })
            .collect())
    }

    /// Accumulates `dL/dW`, `dL/db` and returns `dL/dx`.
    pub fn backward(&mut self, x: &[T], dy: &[T]) -> Result<Vec<T>> {
        let (out, inp) = (self.output_dim(), self.input_dim());
        check_len(&self.w.name, inp, x.len())?;
        check_len(&self.b.name, out, dy.len())?;
        let mut dx = vec![T::zero(); inp];
        for o in 0..out {
            let g = dy[o];
            if g == T::zero() {
                continue;
            }
            self.b.grad[o] = self.b.grad[o] + g;
            let row = &self.w.value[o * inp..(o + 1) * inp];
            let grow = &mut self.w.grad[o * inp..(o + 1) * inp];
            for i in 0..inp {
                grow[i] = grow[i] + g * x[i];
                dx[i] = dx[i] + g * row[i];
            }
        }
        Ok(dx)
    }
}

impl<T: Real> Module<T> for Dense<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.b]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.b]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    pub fn apply<T: Real>(self, x: &[T]) -> Vec<T> {
        match self {
            Activation::Identity => x.to_vec(),
            Activation::Relu => x.iter().map(|&v| v.max(T::zero())).collect(),
            Activation::Tanh => x.iter().map(|v| v.tanh()).collect(),
        }
    }

    /// Gradient through the activation given its input `x` and output `y`.
    pub fn backward<T: Real>(self, x: &[T], y: &[T], dy: &[T]) -> Vec<T> {
        match self {
            Activation::Identity => dy.to_vec(),
            Activation::Relu => x
                .iter()
                .zip(dy)
                .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                .collect(),
            Activation::Tanh => y.iter().zip(dy).map(|(&t, &g)| g * (T::one() - t * t)).collect(),
        }
    }
}
