use rand::Rng;

use lbgame_nn::{Dense, GruCache, GruCell, Module, Param, Real, Result};

/// Head weights start this much smaller than a fan-in draw.
const HEAD_INIT_SCALE: f64 = 0.1;

fn small_head<T: Real, R: Rng + ?Sized>(name: &str, input: usize, output: usize, rng: &mut R) -> Dense<T> {
    let mut d = Dense::new(name, input, output, rng);
    d.w.value.iter_mut().for_each(|w| *w = *w * T::c(HEAD_INIT_SCALE));
    d
}

fn relu<T: Real>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v.max(T::zero())).collect()
}

fn relu_grad<T: Real>(pre: &[T], dy: &[T]) -> Vec<T> {
    pre.iter().zip(dy).map(|(&p, &g)| if p > T::zero() { g } else { T::zero() }).collect()
}

/// `Wᵀ dy` without touching the layer's gradients.
pub fn input_grad<T: Real>(layer: &Dense<T>, dy: &[T]) -> Vec<T> {
    let inp = layer.input_dim();
    let mut dx = vec![T::zero(); inp];
    for (o, &g) in dy.iter().enumerate() {
        let row = &layer.w.value[o * inp..(o + 1) * inp];
        for i in 0..inp {
            dx[i] = dx[i] + g * row[i];
        }
    }
    dx
}

/// One recurrent encoder step `h' = GRU(relu(W x + b), h)` with its cache.
#[derive(Debug, Clone)]
pub struct EncoderStep<T> {
    pub x: Vec<T>,
    pre: Vec<T>,
    cache: GruCache<T>,
    pub h: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    pub embed: Dense<T>,
    pub gru: GruCell<T>,
}

impl<T: Real> Encoder<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            embed: Dense::new(&format!("{name}.embed"), input, hidden, rng),
            gru: GruCell::new(&format!("{name}.gru"), hidden, hidden, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embed.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.gru.hidden
    }

    pub fn step(&self, x: &[T], h: &[T]) -> Result<EncoderStep<T>> {
        let pre = self.embed.forward(x)?;
        let (h2, cache) = self.gru.forward(&relu(&pre), h)?;
        Ok(EncoderStep { x: x.to_vec(), pre, cache, h: h2 })
    }

    /// Backpropagates `dL/dh'` and returns `dL/dh`.
    pub fn backward(&mut self, st: &EncoderStep<T>, dh: &[T]) -> Result<Vec<T>> {
        let (de, dh_prev) = self.gru.backward(&st.cache, dh)?;
        self.embed.backward(&st.x, &relu_grad(&st.pre, &de))?;
        Ok(dh_prev)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.embed.params();
        v.extend(self.gru.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.embed.params_mut();
        v.extend(self.gru.params_mut());
        v
    }
}

/// Recurrent Gaussian policy over `[o, a_prev]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Actor<T> {
    pub encoder: Encoder<T>,
    pub mean: Dense<T>,
    pub log_std: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct ActorStep<T> {
    pub enc: EncoderStep<T>,
    pub mean: Vec<T>,
    pub log_std: Vec<T>,
}

impl<T: Real> Actor<T> {
    pub fn new<R: Rng + ?Sized>(input: usize, actions: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            encoder: Encoder::new("actor", input, hidden, rng),
            mean: small_head("actor.mean", hidden, actions, rng),
            log_std: small_head("actor.log_std", hidden, actions, rng),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.mean.output_dim()
    }

    pub fn step(&self, x: &[T], h: &[T]) -> Result<ActorStep<T>> {
        let enc = self.encoder.step(x, h)?;
        let mean = self.mean.forward(&enc.h)?;
        let log_std = self.log_std.forward(&enc.h)?;
        Ok(ActorStep { enc, mean, log_std })
    }

    /// `dh_next` is the gradient arriving from the following step's hidden input.
    pub fn backward(&mut self, st: &ActorStep<T>, d_mean: &[T], d_log_std: &[T], dh_next: &[T]) -> Result<Vec<T>> {
        let dm = self.mean.backward(&st.enc.h, d_mean)?;
        let ds = self.log_std.backward(&st.enc.h, d_log_std)?;
        let dh: Vec<T> = dh_next.iter().zip(dm).zip(ds).map(|((&a, b), c)| a + b + c).collect();
        self.encoder.backward(&st.enc, &dh)
    }
}

impl<T: Real> Module<T> for Actor<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.encoder.params();
        v.extend(self.mean.params());
        v.extend(self.log_std.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.encoder.params_mut();
        v.extend(self.mean.params_mut());
        v.extend(self.log_std.params_mut());
        v
    }
}

/// Recurrent Q-function: the encoder reads `[o, a_prev]`, the head scores `[h, a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Critic<T> {
    pub encoder: Encoder<T>,
    pub head: Dense<T>,
    pub out: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct QStep<T> {
    input: Vec<T>,
    pre: Vec<T>,
    act: Vec<T>,
    pub q: T,
}

impl<T: Real> Critic<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, actions: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            encoder: Encoder::new(&format!("{name}.enc"), input, hidden, rng),
            head: Dense::new(&format!("{name}.head"), hidden + actions, hidden, rng),
            out: small_head(&format!("{name}.out"), hidden, 1, rng),
        }
    }

    pub fn q(&self, h: &[T], a: &[T]) -> Result<QStep<T>> {
        let input: Vec<T> = h.iter().chain(a).copied().collect();
        let pre = self.head.forward(&input)?;
        let act = relu(&pre);
        let q = self.out.forward(&act)?[0];
        Ok(QStep { input, pre, act, q })
    }

    /// Accumulates head gradients; returns `(dL/dh, dL/da)`.
    pub fn q_backward(&mut self, st: &QStep<T>, dq: T) -> Result<(Vec<T>, Vec<T>)> {
        let dact = self.out.backward(&st.act, &[dq])?;
        let dx = self.head.backward(&st.input, &relu_grad(&st.pre, &dact))?;
        let hidden = self.encoder.hidden_dim();
        Ok((dx[..hidden].to_vec(), dx[hidden..].to_vec()))
    }

    /// `dQ/da` only; parameters and their gradients are left alone.
    pub fn action_grad(&self, st: &QStep<T>) -> Vec<T> {
        let dact = input_grad(&self.out, &[T::one()]);
        let dx = input_grad(&self.head, &relu_grad(&st.pre, &dact));
        dx[self.encoder.hidden_dim()..].to_vec()
    }
}

impl<T: Real> Module<T> for Critic<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.encoder.params();
        v.extend(self.head.params());
        v.extend(self.out.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.encoder.params_mut();
        v.extend(self.head.params_mut());
        v.extend(self.out.params_mut());
        v
    }
}

/// The online (or target) critics. A single-critic setup holds one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticSet<T> {
    pub critics: Vec<Critic<T>>,
}

impl<T: Real> Module<T> for CriticSet<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.critics.iter().flat_map(|c| c.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.critics.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}

/// Log-parameterised entropy temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct Temperature<T> {
    pub log_alpha: Param<T>,
}

impl<T: Real> Temperature<T> {
    pub fn new(alpha: f64) -> Self {
        Self {
            log_alpha: Param::from_values("log_alpha", &[1], vec![T::c(alpha.ln())]).expect("scalar"),
        }
    }

    pub fn alpha(&self) -> T {
        self.log_alpha.value[0].exp()
    }
}

impl<T: Real> Module<T> for Temperature<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.log_alpha]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.log_alpha]
    }
}
