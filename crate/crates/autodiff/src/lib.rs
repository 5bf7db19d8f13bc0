//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! Values are recorded on a [`Tape`]; [`grad`] returns gradients that are
//! themselves taped, which is what makes gradient penalties (a loss on a
//! gradient norm) differentiable. The [`nn`] module layers convolutions,
//! leaky rectifiers, pooling and dense maps on top, [`optim`] holds Adam,
//! and [`checkpoint`] persists named parameters.

pub mod check;
pub mod checkpoint;
pub mod codec;
pub mod error;
pub mod nn;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use check::{check_gradients, CheckReport};
pub use checkpoint::Checkpoint;
pub use codec::{channels_to_complex, complex_to_channels};
pub use error::{AdError, AdResult};
pub use nn::{BoundParams, ParamSet};
pub use optim::{adam_step, exp_decay_lr, AdamConfig, AdamState};
pub use tape::{concat, grad, grad_values, SelfAdjointOp, Tape, Var};
pub use tensor::Tensor;
