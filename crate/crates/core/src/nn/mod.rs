//! Layer primitives with forward and backward passes.

pub mod activation;
pub mod concat;
pub mod conv;
pub mod dense;
pub mod gradcheck;
pub mod pool;

pub use activation::{relu, relu_backward};
pub use concat::{concat, concat_backward};
pub use conv::{conv2d_backward, conv2d_forward, kernel_elements, ConvGrads, ConvLayerSpec, Padding};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{
    grad_check, probe, relative_error, ConcatLayer, Conv2dLayer, DenseLayer, Layer, LayerGrads,
    MaxPoolLayer, ReluLayer,
};
pub use pool::{maxpool_backward, maxpool_forward, ArgMax, PoolSpec};
