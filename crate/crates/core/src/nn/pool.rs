//! Non-overlapping max pooling over `[H, W, C]` maps.

use serde::{Deserialize, Serialize};

use crate::tensor::{Result, Tensor, TensorError};

/// Window size; the stride equals the window along each axis and remainders
/// are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub window_height: usize,
    pub window_width: usize,
}

impl PoolSpec {
    pub fn new(window_height: usize, window_width: usize) -> Self {
        PoolSpec {
            window_height,
            window_width,
        }
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h / self.window_height, w / self.window_width)
    }
}

/// Flat input offset of the winning element for every output element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArgMax {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    indices: Vec<usize>,
}

impl ArgMax {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn flat_indices(&self) -> &[usize] {
        &self.indices
    }

    /// Winning `(row, column)` for output element `(oh, ow, c)`.
    pub fn coordinate(&self, oh: usize, ow: usize, c: usize) -> (usize, usize) {
        let (out_w, chans) = (self.output_shape[1], self.output_shape[2]);
        let flat = self.indices[(oh * out_w + ow) * chans + c];
        let in_w = self.input_shape[1];
        let cell = flat / chans;
        (cell / in_w, cell % in_w)
    }
}

pub fn maxpool_forward(input: &Tensor, pool: PoolSpec) -> Result<(Tensor, ArgMax)> {
    input.expect_rank("maxpool", 3)?;
    if pool.window_height == 0 || pool.window_width == 0 {
        return Err(TensorError::mismatch(
            "maxpool",
            format!("window {pool:?} must be at least 1x1"),
        ));
    }
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (out_h, out_w) = pool.output_hw(h, w);
    if out_h == 0 || out_w == 0 {
        return Err(TensorError::mismatch(
            "maxpool",
            format!("window {pool:?} larger than input {h}x{w}"),
        ));
    }
    let x = input.data();
    let mut out = vec![f64::NEG_INFINITY; out_h * out_w * c];
    let mut idx = vec![usize::MAX; out.len()];

    for oh in 0..out_h {
        for ow in 0..out_w {
            let o = (oh * out_w + ow) * c;
            // Row-then-column scan with strict comparison keeps the first maximum.
            for ph in 0..pool.window_height {
                for pw in 0..pool.window_width {
                    let ih = oh * pool.window_height + ph;
                    let iw = ow * pool.window_width + pw;
                    let base = (ih * w + iw) * c;
                    for ch in 0..c {
                        let v = x[base + ch];
                        if idx[o + ch] == usize::MAX || v > out[o + ch] {
                            out[o + ch] = v;
                            idx[o + ch] = base + ch;
                        }
                    }
                }
            }
        }
    }
    let output_shape = vec![out_h, out_w, c];
    Ok((
        Tensor::new(&output_shape, out)?,
        ArgMax {
            input_shape: input.shape().to_vec(),
            output_shape,
            indices: idx,
        },
    ))
}

pub fn maxpool_backward(argmax: &ArgMax, upstream: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    if input_shape != argmax.input_shape.as_slice() {
        return Err(TensorError::mismatch(
            "maxpool_backward",
            format!(
                "input shape {:?} does not match forward input {:?}",
                input_shape, argmax.input_shape
            ),
        ));
    }
    upstream.expect_shape("maxpool_backward upstream", &argmax.output_shape)?;
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&i, &u) in argmax.indices.iter().zip(upstream.data()) {
        g[i] += u;
    }
    Ok(grad)
}
