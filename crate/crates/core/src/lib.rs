//! Training and inference engine for a dual-channel 1-D convolutional
//! day-ahead residential load forecaster.

pub mod cost;
pub mod data;
pub mod gradsuite;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod parallel;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod training;

pub use tensor::{Tensor, TensorError};
