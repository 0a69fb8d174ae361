//! Central-difference gradient checking for layer primitives.
//!
//! A [`Layer`] maps some input tensors and parameter tensors to one output.
//! The checker differentiates the scalar `sum_k c_k * y_k`, where `c` is a
//! fixed, non-uniform probe, so that every output element contributes with a
//! distinct weight.

use super::activation::{relu, relu_backward};
use super::concat::{concat, concat_backward};
use super::conv::{conv2d_backward, conv2d_forward, Padding};
use super::dense::{dense_backward, dense_forward};
use super::pool::{maxpool_backward, maxpool_forward, PoolSpec};
use crate::tensor::{Result, Tensor};

/// Gradients with respect to each input and each parameter, in order.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub inputs: Vec<Tensor>,
    pub params: Vec<Tensor>,
}

pub trait Layer {
    fn name(&self) -> &str;
    fn forward(&self, inputs: &[Tensor], params: &[Tensor]) -> Result<Tensor>;
    fn backward(&self, inputs: &[Tensor], params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads>;
}

pub struct Conv2dLayer {
    pub padding: Padding,
}

impl Layer for Conv2dLayer {
    fn name(&self) -> &str {
        "conv2d"
    }

    fn forward(&self, inputs: &[Tensor], params: &[Tensor]) -> Result<Tensor> {
        conv2d_forward(&inputs[0], &params[0], &params[1], self.padding)
    }

    fn backward(&self, inputs: &[Tensor], params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads> {
        let g = conv2d_backward(&inputs[0], &params[0], upstream, self.padding)?;
        Ok(LayerGrads {
            inputs: vec![g.input],
            params: vec![g.weights, g.bias],
        })
    }
}

pub struct MaxPoolLayer {
    pub pool: PoolSpec,
}

impl Layer for MaxPoolLayer {
    fn name(&self) -> &str {
        "maxpool"
    }

    fn forward(&self, inputs: &[Tensor], _params: &[Tensor]) -> Result<Tensor> {
        Ok(maxpool_forward(&inputs[0], self.pool)?.0)
    }

    fn backward(&self, inputs: &[Tensor], _params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads> {
        let (_, arg) = maxpool_forward(&inputs[0], self.pool)?;
        Ok(LayerGrads {
            inputs: vec![maxpool_backward(&arg, upstream, inputs[0].shape())?],
            params: Vec::new(),
        })
    }
}

pub struct ReluLayer;

impl Layer for ReluLayer {
    fn name(&self) -> &str {
        "relu"
    }

    fn forward(&self, inputs: &[Tensor], _params: &[Tensor]) -> Result<Tensor> {
        Ok(relu(&inputs[0]))
    }

    fn backward(&self, inputs: &[Tensor], _params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads> {
        Ok(LayerGrads {
            inputs: vec![relu_backward(&inputs[0], upstream)?],
            params: Vec::new(),
        })
    }
}

pub struct DenseLayer;

impl Layer for DenseLayer {
    fn name(&self) -> &str {
        "dense"
    }

    fn forward(&self, inputs: &[Tensor], params: &[Tensor]) -> Result<Tensor> {
        dense_forward(&inputs[0], &params[0], &params[1])
    }

    fn backward(&self, inputs: &[Tensor], params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads> {
        let g = dense_backward(&inputs[0], &params[0], upstream)?;
        Ok(LayerGrads {
            inputs: vec![g.input],
            params: vec![g.weights, g.bias],
        })
    }
}

pub struct ConcatLayer;

impl Layer for ConcatLayer {
    fn name(&self) -> &str {
        "concat"
    }

    fn forward(&self, inputs: &[Tensor], _params: &[Tensor]) -> Result<Tensor> {
        let refs: Vec<&Tensor> = inputs.iter().collect();
        concat(&refs)
    }

    fn backward(&self, inputs: &[Tensor], _params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads> {
        let lens: Vec<usize> = inputs.iter().map(Tensor::len).collect();
        Ok(LayerGrads {
            inputs: concat_backward(upstream, &lens)?,
            params: Vec::new(),
        })
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / scale
}

/// Fixed weights applied to the layer output before summing.
pub fn probe(len: usize) -> Vec<f64> {
    (0..len).map(|k| 1.0 + 0.5 * ((k + 1) as f64).sin()).collect()
}

fn objective(layer: &dyn Layer, inputs: &[Tensor], params: &[Tensor]) -> Result<f64> {
    let y = layer.forward(inputs, params)?;
    Ok(y.data().iter().zip(probe(y.len())).map(|(a, b)| a * b).sum())
}

/// Maximum relative error between analytic and central-difference gradients
/// over every input and parameter element.
pub fn grad_check(
    layer: &dyn Layer,
    inputs: &[Tensor],
    params: &[Tensor],
    epsilon: f64,
) -> Result<f64> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let y = layer.forward(inputs, params)?;
    let upstream = Tensor::new(y.shape(), probe(y.len()))?;
    let grads = layer.backward(inputs, params, &upstream)?;

    let mut inputs = inputs.to_vec();
    let mut params = params.to_vec();
    let mut worst: f64 = 0.0;

    for (which, analytic) in grads.inputs.iter().enumerate() {
        for i in 0..inputs[which].len() {
            let orig = inputs[which].data()[i];
            inputs[which].data_mut()[i] = orig + epsilon;
            let plus = objective(layer, &inputs, &params)?;
            inputs[which].data_mut()[i] = orig - epsilon;
            let minus = objective(layer, &inputs, &params)?;
            inputs[which].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    for (which, analytic) in grads.params.iter().enumerate() {
        for i in 0..params[which].len() {
            let orig = params[which].data()[i];
            params[which].data_mut()[i] = orig + epsilon;
            let plus = objective(layer, &inputs, &params)?;
            params[which].data_mut()[i] = orig - epsilon;
            let minus = objective(layer, &inputs, &params)?;
            params[which].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
    }
    Ok(worst)
}
