use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LoadCNNConfig, ModelError};
use crate::nn::ConvLayerSpec;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// All learnable tensors of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCNNParams {
    pub horizontal: Vec<ConvParams>,
    pub vertical: Vec<ConvParams>,
    pub head_weights: Tensor,
    pub head_bias: Tensor,
}

fn he_tensor(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| normal.sample(rng))
}

impl LoadCNNParams {
    pub fn zeros(config: &LoadCNNConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let conv = |specs: &[ConvLayerSpec]| {
            specs
                .iter()
                .map(|s| ConvParams {
                    weights: Tensor::zeros(&s.weight_shape()),
                    bias: Tensor::zeros(&[s.out_channels]),
                })
                .collect()
        };
        let n = config.head_input_size()?;
        Ok(LoadCNNParams {
            horizontal: conv(&config.horizontal.layers),
            vertical: conv(&config.vertical.layers),
            head_weights: Tensor::zeros(&[n, config.output_size]),
            head_bias: Tensor::zeros(&[config.output_size]),
        })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases. Layers are
    /// drawn in the order horizontal, vertical, head from one seeded stream.
    pub fn init(config: &LoadCNNConfig, seed: u64) -> Result<Self, ModelError> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = config
            .horizontal
            .layers
            .iter()
            .zip(p.horizontal.iter_mut())
            .chain(config.vertical.layers.iter().zip(p.vertical.iter_mut()));
        for (spec, cp) in layers {
            let fan_in = spec.kernel_height * spec.kernel_width * spec.in_channels;
            cp.weights = he_tensor(&spec.weight_shape(), fan_in, &mut rng);
        }
        let shape = p.head_weights.shape().to_vec();
        p.head_weights = he_tensor(&shape, shape[0], &mut rng);
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &[ConvParams]| {
            v.iter()
                .map(|c| ConvParams {
                    weights: Tensor::zeros_like(&c.weights),
                    bias: Tensor::zeros_like(&c.bias),
                })
                .collect()
        };
        LoadCNNParams {
            horizontal: z(&self.horizontal),
            vertical: z(&self.vertical),
            head_weights: Tensor::zeros_like(&self.head_weights),
            head_bias: Tensor::zeros_like(&self.head_bias),
        }
    }

    /// Tensors in their canonical order with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (prefix, layers) in [("horizontal", &self.horizontal), ("vertical", &self.vertical)] {
            for (i, c) in layers.iter().enumerate() {
                out.push((format!("{prefix}.{i}.weight"), &c.weights));
                out.push((format!("{prefix}.{i}.bias"), &c.bias));
            }
        }
        out.push(("head.weight".to_string(), &self.head_weights));
        out.push(("head.bias".to_string(), &self.head_bias));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for c in self.horizontal.iter_mut().chain(self.vertical.iter_mut()) {
            out.push(&mut c.weights);
            out.push(&mut c.bias);
        }
        out.push(&mut self.head_weights);
        out.push(&mut self.head_bias);
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += alpha * other`; shapes must agree.
    pub fn add_scaled(&mut self, other: &LoadCNNParams, alpha: f64) -> Result<(), ModelError> {
        let theirs = other.tensors();
        let mine = self.tensors_mut();
        if theirs.len() != mine.len() {
            return Err(ModelError::Mismatch("parameter sets differ in tensor count".into()));
        }
        for (a, b) in mine.into_iter().zip(theirs) {
            a.add_scaled(b, alpha)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            t.scale(alpha);
        }
    }

    pub fn dot(&self, other: &LoadCNNParams) -> Result<f64, ModelError> {
        let mut s = 0.0;
        for (a, b) in self.tensors().into_iter().zip(other.tensors()) {
            s += a.dot(b)?;
        }
        Ok(s)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn round_to_f32(&self) -> Self {
        let mut p = self.clone();
        for t in p.tensors_mut() {
            *t = t.round_to_f32();
        }
        p
    }

    /// Checks every tensor shape against the config.
    pub fn check_shapes(&self, config: &LoadCNNConfig) -> Result<(), ModelError> {
        let expected = Self::zeros(config)?;
        let mine = self.named_tensors();
        let want = expected.named_tensors();
        if mine.len() != want.len() {
            return Err(ModelError::Mismatch(format!(
                "parameter set has {} tensors, config needs {}",
                mine.len(),
                want.len()
            )));
        }
        for ((name, t), (_, e)) in mine.iter().zip(&want) {
            if t.shape() != e.shape() {
                return Err(ModelError::Mismatch(format!(
                    "{name}: shape {:?}, config needs {:?}",
                    t.shape(),
                    e.shape()
                )));
            }
        }
        Ok(())
    }
}
