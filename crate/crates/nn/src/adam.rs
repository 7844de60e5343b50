use crate::param::Module;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub skipped: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: T) -> Self {
        Self {
            lr,
            beta1: T::c(0.9),
            beta2: T::c(0.999),
            eps: T::c(1e-8),
            step: 0,
            skipped: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one bias-corrected update and zeroes the gradients. A
    /// non-finite gradient skips the update; returns whether it was applied.
    pub fn step<M: Module<T>>(&mut self, module: &mut M) -> bool {
        let mut params = module.params_mut();
        if params.iter().any(|p| !p.grads_finite()) {
            self.skipped += 1;
            log::warn!("adam: non-finite gradient, step {} skipped", self.step + 1);
            params.iter_mut().for_each(|p| p.zero_grad());
            return false;
        }
        if self.m.len() != params.len() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for (k, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (T::one() - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (T::one() - self.beta2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p.value[i] = p.value[i] - self.lr * mhat / (vhat.sqrt() + self.eps);
                p.grad[i] = T::zero();
            }
            debug_assert!(p.value.iter().all(|x| x.is_finite()), "{} became non-finite", p.name);
        }
        true
    }
}
