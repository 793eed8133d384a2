//! MSE loss, Adam, learning-rate schedule and the training loop.

mod adam;
mod config;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::{lr_for_epoch, TrainConfig};
pub use loss::mse_loss;
pub use trainer::{
    new_adam_state, stack_batch, test_mse, train, train_iteration, train_step, AugmentedSampler,
    EpochRecord, FixedSampler, Sampler, TrainHistory, Trainer,
};
