use rand::Rng;

use crate::init::{fan_in_uniform, orthogonal};
use crate::param::{check_len, Module, Param, Result};
use crate::real::{sigmoid, Real};

/// Gated recurrent cell with `h' = (1−z)⊙h + z⊙h̃`.
///
/// Each gate matrix is `hidden × (input + hidden)` acting on `[x, h]`
/// (on `[x, r⊙h]` for the candidate).
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<T> {
    pub input: usize,
    pub hidden: usize,
    pub w_z: Param<T>,
    pub b_z: Param<T>,
    pub w_r: Param<T>,
    pub b_r: Param<T>,
    pub w_h: Param<T>,
    pub b_h: Param<T>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GruCache<T> {
    pub xh: Vec<T>,
    pub xrh: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
    pub h: Vec<T>,
}

fn matvec<T: Real>(w: &[T], b: &[T], x: &[T]) -> Vec<T> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| {
            w[o * cols..(o + 1) * cols]
                .iter()
                .zip(x)
                .fold(bo, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect()
}

/// Accumulates outer-product weight gradients and adds `Wᵀ da` into `dx`.
fn matvec_backward<T: Real>(w: &[T], gw: &mut [T], gb: &mut [T], x: &[T], da: &[T], dx: &mut [T]) {
    let cols = x.len();
    for (o, &g) in da.iter().enumerate() {
        gb[o] = gb[o] + g;
        let row = &w[o * cols..(o + 1) * cols];
        let grow = &mut gw[o * cols..(o + 1) * cols];
        for i in 0..cols {
            grow[i] = grow[i] + g * x[i];
            dx[i] = dx[i] + g * row[i];
        }
    }
}

impl<T: Real> GruCell<T> {
    pub fn zeros(name: &str, input: usize, hidden: usize) -> Self {
        let shape = [hidden, input + hidden];
        Self {
            input,
            hidden,
            w_z: Param::zeros(format!("{name}.w_z"), &shape),
            b_z: Param::zeros(format!("{name}.b_z"), &[hidden]),
            w_r: Param::zeros(format!("{name}.w_r"), &shape),
            b_r: Param::zeros(format!("{name}.b_r"), &[hidden]),
            w_h: Param::zeros(format!("{name}.w_h"), &shape),
            b_h: Param::zeros(format!("{name}.b_h"), &[hidden]),
        }
    }

    /// Fan-in uniform input weights, orthogonal recurrent weights, zero biases.
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut cell = Self::zeros(name, input, hidden);
        let cols = input + hidden;
        for w in [&mut cell.w_z, &mut cell.w_r, &mut cell.w_h] {
            let win: Vec<T> = fan_in_uniform(rng, input, hidden * input);
            let wrec: Vec<T> = orthogonal(rng, hidden);
            for o in 0..hidden {
                w.value[o * cols..o * cols + input].copy_from_slice(&win[o * input..(o + 1) * input]);
                w.value[o * cols + input..(o + 1) * cols].copy_from_slice(&wrec[o * hidden..(o + 1) * hidden]);
            }
        }
        cell
    }

    pub fn forward(&self, x: &[T], h: &[T]) -> Result<(Vec<T>, GruCache<T>)> {
        check_len("gru input", self.input, x.len())?;
        check_len("gru hidden", self.hidden, h.len())?;
        let mut xh = Vec::with_capacity(self.input + self.hidden);
        xh.extend_from_slice(x);
        xh.extend_from_slice(h);
        let z: Vec<T> = matvec(&self.w_z.value, &self.b_z.value, &xh).into_iter().map(sigmoid).collect();
        let r: Vec<T> = matvec(&self.w_r.value, &self.b_r.value, &xh).into_iter().map(sigmoid).collect();
        let mut xrh = Vec::with_capacity(self.input + self.hidden);
        xrh.extend_from_slice(x);
        xrh.extend(r.iter().zip(h).map(|(&ri, &hi)| ri * hi));
        let n: Vec<T> = matvec(&self.w_h.value, &self.b_h.value, &xrh).into_iter().map(|a| a.tanh()).collect();
        let h_new = (0..self.hidden)
            .map(|k| (T::one() - z[k]) * h[k] + z[k] * n[k])
            .collect();
        Ok((
            h_new,
            GruCache {
                xh,
                xrh,
                z,
                r,
                n,
                h: h.to_vec(),
            },
        ))
    }

    /// Accumulates parameter gradients; returns `(dL/dx, dL/dh)`.
    pub fn backward(&mut self, cache: &GruCache<T>, dh_new: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_len("gru grad", self.hidden, dh_new.len())?;
        let (inp, hid) = (self.input, self.hidden);
        let GruCache { xh, xrh, z, r, n, h } = cache;
        let mut dh: Vec<T> = (0..hid).map(|k| dh_new[k] * (T::one() - z[k])).collect();
        let da_n: Vec<T> = (0..hid).map(|k| dh_new[k] * z[k] * (T::one() - n[k] * n[k])).collect();
        let da_z: Vec<T> = (0..hid)
            .map(|k| dh_new[k] * (n[k] - h[k]) * z[k] * (T::one() - z[k]))
            .collect();

        let mut dxrh = vec![T::zero(); inp + hid];
        matvec_backward(&self.w_h.value, &mut self.w_h.grad, &mut self.b_h.grad, xrh, &da_n, &mut dxrh);

        let mut dx: Vec<T> = dxrh[..inp].to_vec();
        let mut da_r = vec![T::zero(); hid];
        for k in 0..hid {
            let d_rh = dxrh[inp + k];
            dh[k] = dh[k] + d_rh * r[k];
            da_r[k] = d_rh * h[k] * r[k] * (T::one() - r[k]);
        }

        let mut dxh = vec![T::zero(); inp + hid];
        matvec_backward(&self.w_z.value, &mut self.w_z.grad, &mut self.b_z.grad, xh, &da_z, &mut dxh);
        matvec_backward(&self.w_r.value, &mut self.w_r.grad, &mut self.b_r.grad, xh, &da_r, &mut dxh);

        for i in 0..inp {
            dx[i] = dx[i] + dxh[i];
        }
        for k in 0..hid {
            dh[k] = dh[k] + dxh[inp + k];
        }
        Ok((dx, dh))
    }
}

impl<T: Real> Module<T> for GruCell<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w_z, &self.b_z, &self.w_r, &self.b_r, &self.w_h, &self.b_h]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![
            &mut self.w_z,
            &mut self.b_z,
            &mut self.w_r,
            &mut self.b_r,
            &mut self.w_h,
            &mut self.b_h,
        ]
    }
}
