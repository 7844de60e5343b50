//! Minimal manual-backprop building blocks: dense and GRU layers, a
//! tanh-squashed Gaussian head, Adam, soft target updates, a
//! finite-difference gradient checker and a text checkpoint format.

pub mod adam;
pub mod checkpoint;
pub mod dense;
pub mod gaussian;
pub mod gradcheck;
pub mod gru;
pub mod init;
pub mod param;
pub mod real;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_VERSION};
pub use dense::{Activation, Dense};
pub use gaussian::{
    gaussian_head_sample, log_one_minus_tanh_sq, squashed_backward, squashed_from_noise,
    squashed_mean, SquashedSample, LOG_STD_MAX, LOG_STD_MIN,
};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use gru::{GruCache, GruCell};
pub use param::{hard_update, soft_update, Module, NnError, Param, Result};
pub use real::{sigmoid, softplus, Real};

pub type DenseF64 = Dense<f64>;
pub type DenseF32 = Dense<f32>;
pub type GruCellF64 = GruCell<f64>;
pub type GruCellF32 = GruCell<f32>;
pub type AdamF64 = Adam<f64>;
