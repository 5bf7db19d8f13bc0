//! Unrolled super-resolution reconstruction network with adversarial training.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discriminator;
pub mod error;
pub mod generator;
pub mod loss;
pub mod train;

pub use discriminator::{discriminator_forward, DiscConfig, DiscKind, DiscriminatorParams};
pub use error::{NetError, NetResult};
pub use generator::{srr_forward, srr_forward_iterates, srr_forward_taped, GeneratorConfig, UnrolledModelParams};
pub use loss::{loss_discriminator, loss_generator};
pub use train::{
    infer, infer_from_checkpoint, initial_params, load_checkpoint, save_checkpoint, train, GanConfig, StepLog,
    TrainConfig, TrainOutcome,
};
