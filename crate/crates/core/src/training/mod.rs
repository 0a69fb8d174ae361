//! Optimization loop, optimizers, learning-rate schedule and checkpoints.

mod checkpoint;
mod optimizer;
mod trainer;

use thiserror::Error;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, FORMAT_VERSION, MAGIC,
};
pub use optimizer::{
    optimizer_step, step_params, OptimizerKind, OptimizerState, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPSILON,
};
pub use trainer::{
    epoch_batches, lr_schedule, train, train_from, LogRecord, TrainConfig, TrainLog,
    LOG_CSV_HEADER,
};

use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("{0} set is empty")]
    EmptyDataset(&'static str),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss or gradient at step {step} (lr {lr:e}, batch {batch:?})")]
    NonFinite {
        step: usize,
        lr: f64,
        batch: Vec<usize>,
    },
    #[error("{0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
