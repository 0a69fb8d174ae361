//! Randomized finite-difference checks over every layer primitive and the
//! full model.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{default_config, grad_check_model, LoadCNNParams, ModelError, Sample};
use crate::nn::{
    grad_check, ConcatLayer, Conv2dLayer, DenseLayer, Layer, LayerGrads, MaxPoolLayer, Padding,
    PoolSpec, ReluLayer,
};
use crate::tensor::{Tensor, TensorError};

pub const SUITE_EPSILON: f64 = 1e-5;
pub const SUITE_TOLERANCE: f64 = 1e-4;
pub const SUITE_TRIALS: usize = 100;

/// A deliberately broken backward pass, used to show the suite catches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Flip the sign of the convolution's input and weight gradients.
    Conv,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conv" | "conv2d" => Ok(Fault::Conv),
            other => Err(format!("unknown fault {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerResult {
    pub layer: String,
    pub trials: usize,
    pub max_error: f64,
}

impl LayerResult {
    pub fn passed(&self) -> bool {
        self.max_error < SUITE_TOLERANCE
    }
}

struct SignFlipped<L>(L);

impl<L: Layer> Layer for SignFlipped<L> {
    fn name(&self) -> &str {
        self.0.name()
    }

    fn forward(&self, inputs: &[Tensor], params: &[Tensor]) -> Result<Tensor, TensorError> {
        self.0.forward(inputs, params)
    }

    fn backward(&self, inputs: &[Tensor], params: &[Tensor], upstream: &Tensor) -> Result<LayerGrads, TensorError> {
        let mut g = self.0.backward(inputs, params, upstream)?;
        g.inputs[0].scale(-1.0);
        g.params[0].scale(-1.0);
        Ok(g)
    }
}

fn normal(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| StandardNormal.sample(rng))
}

/// Values bounded away from zero so no ReLU kink sits inside the stencil.
fn off_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.01..2.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A random permutation of a well-separated grid, so every pooling window
/// has a unique maximum with a wide margin.
fn distinct(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    use rand::seq::SliceRandom;
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * 0.01 - 0.5).collect();
    v.shuffle(rng);
    Tensor::from_fn(shape, |i| v[i])
}

fn conv_trial(rng: &mut ChaCha8Rng, fault: Option<Fault>) -> Result<f64, TensorError> {
    let h = rng.random_range(1..=8);
    let w = rng.random_range(1..=8);
    let cin = rng.random_range(1..=3);
    let cout = rng.random_range(1..=3);
    let padding = if rng.random_bool(0.5) {
        Padding::Same
    } else {
        Padding::Valid
    };
    let (kh, kw) = match padding {
        Padding::Same => (rng.random_range(1..=5), rng.random_range(1..=5)),
        Padding::Valid => (rng.random_range(1..=h), rng.random_range(1..=w)),
    };
    let x = normal(rng, &[h, w, cin]);
    let k = normal(rng, &[kh, kw, cin, cout]);
    let b = normal(rng, &[cout]);
    let layer = Conv2dLayer { padding };
    match fault {
        Some(Fault::Conv) => grad_check(&SignFlipped(layer), &[x], &[k, b], SUITE_EPSILON),
        None => grad_check(&layer, &[x], &[k, b], SUITE_EPSILON),
    }
}

fn pool_trial(rng: &mut ChaCha8Rng) -> Result<f64, TensorError> {
    let ph = rng.random_range(1..=3);
    let pw = rng.random_range(1..=3);
    let h = rng.random_range(ph..=8);
    let w = rng.random_range(pw..=8);
    let c = rng.random_range(1..=3);
    let x = distinct(rng, &[h, w, c]);
    let layer = MaxPoolLayer {
        pool: PoolSpec::new(ph, pw),
    };
    grad_check(&layer, &[x], &[], SUITE_EPSILON)
}

fn relu_trial(rng: &mut ChaCha8Rng) -> Result<f64, TensorError> {
    let shape = [rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=3)];
    grad_check(&ReluLayer, &[off_zero(rng, &shape)], &[], SUITE_EPSILON)
}

fn dense_trial(rng: &mut ChaCha8Rng) -> Result<f64, TensorError> {
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=8);
    let x = normal(rng, &[n]);
    let w = normal(rng, &[n, m]);
    let b = normal(rng, &[m]);
    grad_check(&DenseLayer, &[x], &[w, b], SUITE_EPSILON)
}

fn concat_trial(rng: &mut ChaCha8Rng) -> Result<f64, TensorError> {
    let parts = rng.random_range(1..=4);
    let inputs: Vec<Tensor> = (0..parts)
        .map(|_| {
            let n = rng.random_range(1..=8);
            normal(rng, &[n])
        })
        .collect();
    grad_check(&ConcatLayer, &inputs, &[], SUITE_EPSILON)
}

fn one_hot(len: usize, hot: &[usize]) -> Tensor {
    Tensor::from_fn(&[len], |i| if hot.contains(&i) { 1.0 } else { 0.0 })
}

/// A random but well-formed sample for the default configuration.
pub fn random_sample(rng: &mut ChaCha8Rng) -> Sample {
    let c = default_config();
    let f = &c.features;
    Sample {
        history: Tensor::from_fn(&[c.history_days, c.slots_per_day], |_| rng.random_range(0.0..2.0)),
        id_onehot: one_hot(f.id, &[rng.random_range(0..f.id / 2), f.id / 2 + rng.random_range(0..f.id / 2)]),
        month: one_hot(f.month, &[rng.random_range(0..f.month)]),
        day: one_hot(f.day, &[rng.random_range(0..f.day)]),
        week: one_hot(f.week, &[rng.random_range(0..f.week)]),
        target: Tensor::from_fn(&[c.output_size], |_| rng.random_range(0.0..2.0)),
        customer_index: 0,
        target_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date"),
    }
}

/// He-initialized weights with random biases. Zero biases would leave units
/// with an all-zero receptive field exactly on the ReLU kink.
pub fn smooth_params(rng: &mut ChaCha8Rng) -> Result<LoadCNNParams, ModelError> {
    let mut params = LoadCNNParams::init(&default_config(), rng.random())?;
    let biases = params
        .horizontal
        .iter_mut()
        .chain(params.vertical.iter_mut())
        .map(|c| &mut c.bias)
        .chain(std::iter::once(&mut params.head_bias));
    for b in biases {
        *b = Tensor::from_fn(b.shape(), |_| {
            let z: f64 = StandardNormal.sample(rng);
            0.1 * z
        });
    }
    Ok(params)
}

fn model_check(rng: &mut ChaCha8Rng, trials: usize) -> Result<f64, ModelError> {
    let c = default_config();
    let samples = 10.min(trials.max(1));
    let mut worst: f64 = 0.0;
    let mut done = 0;
    for s in 0..samples {
        let directions = (trials - done) / (samples - s);
        let params = smooth_params(rng)?;
        let sample = random_sample(rng);
        worst = worst.max(grad_check_model(&c, &params, &sample, SUITE_EPSILON, directions, rng.random())?.max_error);
        done += directions;
    }
    Ok(worst)
}

/// Runs `trials` random checks for each layer type and for the model. The
/// result lists every layer exactly once, in a fixed order.
pub fn run_gradient_suite(seed: u64, trials: usize, fault: Option<Fault>) -> Result<Vec<LayerResult>, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();
    let mut run = |name: &str, f: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<f64, TensorError>| {
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            worst = worst.max(f(&mut rng)?);
        }
        results.push(LayerResult {
            layer: name.to_string(),
            trials,
            max_error: worst,
        });
        Ok::<_, TensorError>(())
    };
    run("conv2d", &mut |r| conv_trial(r, fault))?;
    run("maxpool", &mut pool_trial)?;
    run("relu", &mut relu_trial)?;
    run("dense", &mut dense_trial)?;
    run("concat", &mut concat_trial)?;
    results.push(LayerResult {
        layer: "model".to_string(),
        trials,
        max_error: model_check(&mut rng, trials)?,
    });
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let r = run_gradient_suite(1, 5, None).unwrap();
        let names: Vec<&str> = r.iter().map(|l| l.layer.as_str()).collect();
        assert_eq!(names, ["conv2d", "maxpool", "relu", "dense", "concat", "model"]);
        assert!(r.iter().all(LayerResult::passed), "{r:?}");
    }

    #[test]
    fn injected_fault_is_caught() {
        let r = run_gradient_suite(1, 5, Some(Fault::Conv)).unwrap();
        assert!(!r[0].passed());
        assert!(r[1..].iter().all(LayerResult::passed));
    }
}
