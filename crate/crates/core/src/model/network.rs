//! Forward prediction, loss, and reverse-mode gradients of the network.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{ChannelConfig, ConvParams, LoadCNNConfig, LoadCNNParams, ModelError};
use crate::nn::conv::conv2d_backward_params;
use crate::nn::{
    concat, conv2d_backward, conv2d_forward, dense_backward, dense_forward, maxpool_backward,
    maxpool_forward, relative_error, relu, relu_backward, ArgMax,
};
use crate::tensor::Tensor;

/// One training or inference instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// `[days, slots]` history in kWh; row 0 is the oldest day.
    pub history: Tensor,
    pub id_onehot: Tensor,
    pub month: Tensor,
    pub day: Tensor,
    pub week: Tensor,
    /// Day to predict, in kWh.
    pub target: Tensor,
    pub customer_index: usize,
    pub target_date: NaiveDate,
}

impl Sample {
    pub fn check(&self, config: &LoadCNNConfig) -> Result<(), ModelError> {
        let checks: [(&str, &Tensor, Vec<usize>); 6] = [
            ("history", &self.history, vec![config.history_days, config.slots_per_day]),
            ("id_onehot", &self.id_onehot, vec![config.features.id]),
            ("month", &self.month, vec![config.features.month]),
            ("day", &self.day, vec![config.features.day]),
            ("week", &self.week, vec![config.features.week]),
            ("target", &self.target, vec![config.output_size]),
        ];
        for (name, t, shape) in checks {
            if t.shape() != shape.as_slice() {
                return Err(ModelError::Mismatch(format!(
                    "sample {name} has shape {:?}, config expects {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }
}

struct LayerTrace {
    input: Tensor,
    pre_activation: Tensor,
    pool: Option<(ArgMax, Vec<usize>)>,
}

struct Trace {
    horizontal: Vec<LayerTrace>,
    vertical: Vec<LayerTrace>,
    head_input: Tensor,
    channel_lens: (usize, usize),
    channel_shapes: (Vec<usize>, Vec<usize>),
}

fn run_channel(
    cfg: &ChannelConfig,
    params: &[ConvParams],
    mut x: Tensor,
    mut trace: Option<&mut Vec<LayerTrace>>,
) -> Result<Tensor, ModelError> {
    if params.len() != cfg.layers.len() {
        return Err(ModelError::Mismatch(format!(
            "channel has {} layers but {} parameter sets",
            cfg.layers.len(),
            params.len()
        )));
    }
    for (i, (spec, p)) in cfg.layers.iter().zip(params).enumerate() {
        let z = conv2d_forward(&x, &p.weights, &p.bias, spec.padding)?;
        let mut a = relu(&z);
        let mut pool = None;
        if let Some(ps) = cfg.pool_after(i) {
            let shape = a.shape().to_vec();
            let (pooled, arg) = maxpool_forward(&a, ps)?;
            a = pooled;
            pool = Some((arg, shape));
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(LayerTrace {
                input: x,
                pre_activation: z,
                pool,
            });
        }
        x = a;
    }
    Ok(x)
}

fn head_input(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    sample: &Sample,
    trace: Option<&mut Trace>,
) -> Result<Tensor, ModelError> {
    sample.check(config)?;
    let image = sample
        .history
        .clone()
        .reshape(&[config.history_days, config.slots_per_day, 1])?;
    let (mut th, mut tv) = (Vec::new(), Vec::new());
    let tracing = trace.is_some();
    let h = run_channel(
        &config.horizontal,
        &params.horizontal,
        image.clone(),
        tracing.then_some(&mut th),
    )?;
    let v = run_channel(&config.vertical, &params.vertical, image, tracing.then_some(&mut tv))?;
    let shapes = (h.shape().to_vec(), v.shape().to_vec());
    let (h, v) = (h.flatten(), v.flatten());
    let joined = concat(&[
        &h,
        &v,
        &sample.id_onehot,
        &sample.month,
        &sample.day,
        &sample.week,
    ])?;
    if let Some(t) = trace {
        t.horizontal = th;
        t.vertical = tv;
        t.channel_lens = (h.len(), v.len());
        t.channel_shapes = shapes;
        t.head_input = joined.clone();
    }
    Ok(joined)
}

/// The vector fed to the dense head: flattened horizontal channel, flattened
/// vertical channel, then the id, month, day and week encodings.
pub fn head_features(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    sample: &Sample,
) -> Result<Tensor, ModelError> {
    head_input(config, params, sample, None)
}

/// Raw (linear) network output.
pub fn forward(config: &LoadCNNConfig, params: &LoadCNNParams, sample: &Sample) -> Result<Tensor, ModelError> {
    let x = head_input(config, params, sample, None)?;
    Ok(dense_forward(&x, &params.head_weights, &params.head_bias)?)
}

/// Forward output with the optional non-negativity clamp applied.
pub fn predict(config: &LoadCNNConfig, params: &LoadCNNParams, sample: &Sample) -> Result<Tensor, ModelError> {
    let y = forward(config, params, sample)?;
    Ok(if config.clamp_output {
        y.map(|v| v.max(0.0))
    } else {
        y
    })
}

/// Root-mean-square error between a prediction and its target.
pub fn loss(prediction: &Tensor, target: &Tensor) -> Result<f64, ModelError> {
    if prediction.len() != target.len() || prediction.rank() != 1 || target.rank() != 1 {
        return Err(ModelError::Mismatch(format!(
            "loss: prediction {:?} vs target {:?}",
            prediction.shape(),
            target.shape()
        )));
    }
    let n = prediction.len() as f64;
    let ss: f64 = prediction
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t).powi(2))
        .sum();
    Ok((ss / n).sqrt())
}

/// d loss / d prediction; zero when the residual is exactly zero.
fn loss_grad(prediction: &Tensor, target: &Tensor, loss: f64) -> Tensor {
    if loss == 0.0 {
        return Tensor::zeros_like(prediction);
    }
    let denom = prediction.len() as f64 * loss;
    Tensor::from_fn(prediction.shape(), |i| {
        (prediction.data()[i] - target.data()[i]) / denom
    })
}

fn channel_backward(
    cfg: &ChannelConfig,
    params: &[ConvParams],
    trace: &[LayerTrace],
    mut grad: Tensor,
) -> Result<Vec<ConvParams>, ModelError> {
    let mut out = Vec::with_capacity(params.len());
    for i in (0..params.len()).rev() {
        let t = &trace[i];
        let padding = cfg.layers[i].padding;
        if let Some((arg, shape)) = &t.pool {
            grad = maxpool_backward(arg, &grad, shape)?;
        }
        grad = relu_backward(&t.pre_activation, &grad)?;
        if i == 0 {
            let (w, b) = conv2d_backward_params(&t.input, &params[i].weights, &grad, padding)?;
            out.push(ConvParams { weights: w, bias: b });
        } else {
            let g = conv2d_backward(&t.input, &params[i].weights, &grad, padding)?;
            out.push(ConvParams {
                weights: g.weights,
                bias: g.bias,
            });
            grad = g.input;
        }
    }
    out.reverse();
    Ok(out)
}

/// Per-sample loss and its gradient with respect to every parameter.
pub fn backward(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    sample: &Sample,
) -> Result<(f64, LoadCNNParams), ModelError> {
    let mut trace = Trace {
        horizontal: Vec::new(),
        vertical: Vec::new(),
        head_input: Tensor::zeros(&[1]),
        channel_lens: (0, 0),
        channel_shapes: (Vec::new(), Vec::new()),
    };
    let x = head_input(config, params, sample, Some(&mut trace))?;
    let y = dense_forward(&x, &params.head_weights, &params.head_bias)?;
    let l = loss(&y, &sample.target)?;
    let gy = loss_grad(&y, &sample.target, l);
    let head = dense_backward(&trace.head_input, &params.head_weights, &gy)?;

    let (hl, vl) = trace.channel_lens;
    let gx = head.input.data();
    let gh = Tensor::new(&trace.channel_shapes.0, gx[..hl].to_vec())?;
    let gv = Tensor::new(&trace.channel_shapes.1, gx[hl..hl + vl].to_vec())?;

    let horizontal = channel_backward(&config.horizontal, &params.horizontal, &trace.horizontal, gh)?;
    let vertical = channel_backward(&config.vertical, &params.vertical, &trace.vertical, gv)?;
    Ok((
        l,
        LoadCNNParams {
            horizontal,
            vertical,
            head_weights: head.weights,
            head_bias: head.bias,
        },
    ))
}

/// Mean per-sample loss over a batch.
pub fn batch_loss(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    samples: &[&Sample],
) -> Result<f64, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| loss(&forward(config, params, s)?, &s.target))
        .collect::<Result<_, _>>()?;
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

const REDUCE_CHUNK: usize = 16;

/// Mean loss and mean gradient over a batch. Per-sample work may run in
/// parallel; the reduction always runs in sample order, so the result does
/// not depend on the number of worker threads.
pub fn batch_gradient(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    samples: &[&Sample],
) -> Result<(f64, LoadCNNParams), ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mut total = params.zeros_like();
    let mut loss_sum = 0.0;
    for chunk in samples.chunks(REDUCE_CHUNK) {
        let parts: Vec<(f64, LoadCNNParams)> = chunk
            .par_iter()
            .map(|s| backward(config, params, s))
            .collect::<Result<_, _>>()?;
        for (l, g) in parts {
            loss_sum += l;
            total.add_scaled(&g, 1.0)?;
        }
    }
    let n = samples.len() as f64;
    total.scale(1.0 / n);
    Ok((loss_sum / n, total))
}

/// ReLU on/off states and pooling winners of every layer. Two parameter
/// vectors with equal patterns lie in the same smooth piece of the network.
pub fn activation_pattern(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    sample: &Sample,
) -> Result<Vec<usize>, ModelError> {
    let mut trace = Trace {
        horizontal: Vec::new(),
        vertical: Vec::new(),
        head_input: Tensor::zeros(&[1]),
        channel_lens: (0, 0),
        channel_shapes: (Vec::new(), Vec::new()),
    };
    head_input(config, params, sample, Some(&mut trace))?;
    let mut out = Vec::new();
    for t in trace.horizontal.iter().chain(&trace.vertical) {
        out.extend(t.pre_activation.data().iter().map(|&z| usize::from(z > 0.0)));
        if let Some((arg, _)) = &t.pool {
            out.extend_from_slice(arg.flat_indices());
        }
    }
    Ok(out)
}

/// Outcome of a directional gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalCheck {
    pub max_error: f64,
    pub directions: usize,
    /// Directions discarded because the stencil crossed a ReLU or pooling kink.
    pub rejected: usize,
}

/// Compares the analytic directional derivative `grad . d` with the central
/// difference `(L(p + eps d) - L(p - eps d)) / 2 eps` along `directions`
/// random unit directions `d`. Directions whose stencil leaves the smooth
/// piece containing `p` are redrawn, up to 20 times per direction.
pub fn grad_check_model(
    config: &LoadCNNConfig,
    params: &LoadCNNParams,
    sample: &Sample,
    epsilon: f64,
    directions: usize,
    seed: u64,
) -> Result<DirectionalCheck, ModelError> {
    let (_, grad) = backward(config, params, sample)?;
    let base = activation_pattern(config, params, sample)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DirectionalCheck {
        max_error: 0.0,
        directions: 0,
        rejected: 0,
    };
    while out.directions < directions {
        if out.rejected > 20 * directions.max(1) {
            return Err(ModelError::Config(format!(
                "no smooth direction found after {} draws",
                out.rejected
            )));
        }
        let mut dir = params.zeros_like();
        for t in dir.tensors_mut() {
            for v in t.data_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
        }
        let norm = dir.dot(&dir)?.sqrt();
        dir.scale(1.0 / norm);
        let mut plus = params.clone();
        plus.add_scaled(&dir, epsilon)?;
        let mut minus = params.clone();
        minus.add_scaled(&dir, -epsilon)?;
        if activation_pattern(config, &plus, sample)? != base
            || activation_pattern(config, &minus, sample)? != base
        {
            out.rejected += 1;
            continue;
        }
        let analytic = grad.dot(&dir)?;
        let lp = loss(&forward(config, &plus, sample)?, &sample.target)?;
        let lm = loss(&forward(config, &minus, sample)?, &sample.target)?;
        let numeric = (lp - lm) / (2.0 * epsilon);
        out.max_error = out.max_error.max(relative_error(analytic, numeric));
        out.directions += 1;
    }
    Ok(out)
}
