//! The dual-channel convolutional load forecaster.
//!
//! The `[7, 48]` history is fed to two stacks of one-dimensional
//! convolutions: the horizontal channel convolves along the 48 half-hour
//! slots of each day, the vertical channel along the 7 days of each slot.
//! Both are flattened and joined with the customer id and calendar one-hots,
//! and a single dense layer maps the result to the 48 predicted values.

mod config;
mod network;
mod params;

use thiserror::Error;

pub use crate::nn::kernel_elements;
use crate::tensor::TensorError;
pub use config::{
    default_config, param_count, ChannelConfig, FeatureSizes, LoadCNNConfig, PoolPlacement,
    KERNEL_COUNTS,
};
pub use network::{
    activation_pattern, backward, batch_gradient, batch_loss, forward, grad_check_model, DirectionalCheck, head_features, loss, predict,
    Sample,
};
pub use params::{ConvParams, LoadCNNParams};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Tensor(#[from] TensorError),
}
