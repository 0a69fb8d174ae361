//! Fully connected layer with linear activation: `y_j = sum_i x_i W_ij + b_j`.

use crate::tensor::{Result, Tensor, TensorError};

fn dims(input: &Tensor, weights: &Tensor) -> Result<(usize, usize)> {
    input.expect_rank("dense input", 1)?;
    weights.expect_rank("dense weights", 2)?;
    let (n, m) = (weights.shape()[0], weights.shape()[1]);
    if input.len() != n {
        return Err(TensorError::mismatch(
            "dense",
            format!("input length {} but weights have {n} rows", input.len()),
        ));
    }
    Ok((n, m))
}

pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (_, m) = dims(input, weights)?;
    bias.expect_shape("dense bias", &[m])?;
    let w = weights.data();
    let mut out = bias.data().to_vec();
    for (i, &x) in input.data().iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(&w[i * m..(i + 1) * m]) {
            *o += x * wv;
        }
    }
    Tensor::new(&[m], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, upstream: &Tensor) -> Result<DenseGrads> {
    let (n, m) = dims(input, weights)?;
    upstream.expect_shape("dense upstream gradient", &[m])?;
    let w = weights.data();
    let g = upstream.data();
    let mut grad_w = vec![0.0; n * m];
    let mut grad_x = vec![0.0; n];
    for (i, &x) in input.data().iter().enumerate() {
        let row = i * m..(i + 1) * m;
        if x != 0.0 {
            for (gw, &gv) in grad_w[row.clone()].iter_mut().zip(g) {
                *gw = x * gv;
            }
        }
        grad_x[i] = w[row].iter().zip(g).map(|(a, b)| a * b).sum();
    }
    Ok(DenseGrads {
        input: Tensor::new(&[n], grad_x)?,
        weights: Tensor::new(&[n, m], grad_w)?,
        bias: upstream.clone(),
    })
}
