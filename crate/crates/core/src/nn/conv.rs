//! 2-D cross-correlation over `[H, W, C]` feature maps.
//!
//! Weights are laid out `[kh, kw, Cin, Cout]` so the innermost loops run over
//! contiguous output channels. Same padding puts `(k - 1) / 2` zeros before
//! the data and the remainder after it, so the extra element lands at the
//! bottom/right.

use serde::{Deserialize, Serialize};

use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub kernel_height: usize,
    pub kernel_width: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: Padding,
}

impl ConvLayerSpec {
    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.kernel_height,
            self.kernel_width,
            self.in_channels,
            self.out_channels,
        ]
    }

    pub fn weight_count(&self) -> usize {
        self.weight_shape().iter().product()
    }

    pub fn param_count(&self) -> usize {
        self.weight_count() + self.out_channels
    }

    /// Spatial output size for an `(h, w)` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        match self.padding {
            Padding::Same => Some((h, w)),
            Padding::Valid => {
                if self.kernel_height > h || self.kernel_width > w {
                    None
                } else {
                    Some((h - self.kernel_height + 1, w - self.kernel_width + 1))
                }
            }
        }
    }
}

/// Elements in one `kh x kw` kernel slice, i.e. per (input, output) channel pair.
pub fn kernel_elements(spec: &ConvLayerSpec) -> usize {
    spec.kernel_height * spec.kernel_width
}

struct Geometry {
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    cout: usize,
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    /// Input row/column feeding output `(oh, ow)` at kernel tap `(dh, dw)`.
    #[inline]
    fn source(&self, oh: usize, ow: usize, dh: usize, dw: usize) -> Option<(usize, usize)> {
        let ih = (oh + dh).checked_sub(self.pad_top)?;
        let iw = (ow + dw).checked_sub(self.pad_left)?;
        (ih < self.h && iw < self.w).then_some((ih, iw))
    }
}

fn geometry(input: &Tensor, weights: &Tensor, bias: &Tensor, padding: Padding) -> Result<Geometry> {
    const CTX: &str = "conv2d";
    input.expect_rank(CTX, 3)?;
    weights.expect_rank("conv2d weights", 4)?;
    bias.expect_rank("conv2d bias", 1)?;
    let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, wcin, cout) = (
        weights.shape()[0],
        weights.shape()[1],
        weights.shape()[2],
        weights.shape()[3],
    );
    if wcin != cin {
        return Err(TensorError::mismatch(
            CTX,
            format!("in_channels: input has {cin}, weights expect {wcin}"),
        ));
    }
    if bias.shape()[0] != cout {
        return Err(TensorError::mismatch(
            CTX,
            format!("out_channels: weights have {cout}, bias has {}", bias.shape()[0]),
        ));
    }
    let (out_h, out_w, pad_top, pad_left) = match padding {
        Padding::Same => (h, w, (kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => {
            if kh > h {
                return Err(TensorError::mismatch(
                    CTX,
                    format!("kernel_height {kh} exceeds input height {h} under valid padding"),
                ));
            }
            if kw > w {
                return Err(TensorError::mismatch(
                    CTX,
                    format!("kernel_width {kw} exceeds input width {w} under valid padding"),
                ));
            }
            (h - kh + 1, w - kw + 1, 0, 0)
        }
    };
    Ok(Geometry {
        h,
        w,
        cin,
        kh,
        kw,
        cout,
        out_h,
        out_w,
        pad_top,
        pad_left,
    })
}

pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    padding: Padding,
) -> Result<Tensor> {
    let g = geometry(input, weights, bias, padding)?;
    let x = input.data();
    let k = weights.data();
    let b = bias.data();
    let mut out = vec![0.0; g.out_h * g.out_w * g.cout];

    for oh in 0..g.out_h {
        for ow in 0..g.out_w {
            let o = (oh * g.out_w + ow) * g.cout;
            let acc = &mut out[o..o + g.cout];
            acc.copy_from_slice(b);
            for dh in 0..g.kh {
                for dw in 0..g.kw {
                    let Some((ih, iw)) = g.source(oh, ow, dh, dw) else {
                        continue;
                    };
                    let xi = (ih * g.w + iw) * g.cin;
                    let ki = (dh * g.kw + dw) * g.cin * g.cout;
                    for ci in 0..g.cin {
                        let xv = x[xi + ci];
                        if xv == 0.0 {
                            continue;
                        }
                        let row = &k[ki + ci * g.cout..ki + (ci + 1) * g.cout];
                        for (a, &wv) in acc.iter_mut().zip(row) {
                            *a += xv * wv;
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[g.out_h, g.out_w, g.cout], out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

pub fn conv2d_backward(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    padding: Padding,
) -> Result<ConvGrads> {
    let (gw, gb, gi) = conv2d_backward_impl(input, weights, upstream, padding, true)?;
    Ok(ConvGrads {
        input: gi.expect("input gradient requested"),
        weights: gw,
        bias: gb,
    })
}

/// Parameter gradients only; skips the input-gradient pass.
pub(crate) fn conv2d_backward_params(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    padding: Padding,
) -> Result<(Tensor, Tensor)> {
    let (gw, gb, _) = conv2d_backward_impl(input, weights, upstream, padding, false)?;
    Ok((gw, gb))
}

fn conv2d_backward_impl(
    input: &Tensor,
    weights: &Tensor,
    upstream: &Tensor,
    padding: Padding,
    want_input: bool,
) -> Result<(Tensor, Tensor, Option<Tensor>)> {
    if weights.rank() != 4 {
        return Err(TensorError::rank("conv2d weights", 4, weights.rank()));
    }
    let bias_shape = [weights.shape()[3]];
    let g = geometry(input, weights, &Tensor::zeros(&bias_shape), padding)?;
    upstream.expect_shape("conv2d upstream gradient", &[g.out_h, g.out_w, g.cout])?;

    let x = input.data();
    let k = weights.data();
    let up = upstream.data();
    let mut grad_w = vec![0.0; k.len()];
    let mut grad_b = vec![0.0; g.cout];
    let mut grad_x = if want_input { vec![0.0; x.len()] } else { Vec::new() };

    for oh in 0..g.out_h {
        for ow in 0..g.out_w {
            let o = (oh * g.out_w + ow) * g.cout;
            let gup = &up[o..o + g.cout];
            if gup.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (gb, &gv) in grad_b.iter_mut().zip(gup) {
                *gb += gv;
            }
            for dh in 0..g.kh {
                for dw in 0..g.kw {
                    let Some((ih, iw)) = g.source(oh, ow, dh, dw) else {
                        continue;
                    };
                    let xi = (ih * g.w + iw) * g.cin;
                    let ki = (dh * g.kw + dw) * g.cin * g.cout;
                    for ci in 0..g.cin {
                        let r = ki + ci * g.cout..ki + (ci + 1) * g.cout;
                        let xv = x[xi + ci];
                        if xv != 0.0 {
                            for (gw, &gv) in grad_w[r.clone()].iter_mut().zip(gup) {
                                *gw += xv * gv;
                            }
                        }
                        if want_input {
                            let s: f64 = k[r].iter().zip(gup).map(|(a, b)| a * b).sum();
                            grad_x[xi + ci] += s;
                        }
                    }
                }
            }
        }
    }

    let grad_w = Tensor::new(weights.shape(), grad_w)?;
    let grad_b = Tensor::new(&bias_shape, grad_b)?;
    let grad_x = if want_input {
        Some(Tensor::new(input.shape(), grad_x)?)
    } else {
        None
    };
    Ok((grad_w, grad_b, grad_x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_window_sum() {
        let x = Tensor::new(&[1, 3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let k = Tensor::full(&[1, 3, 1, 1], 1.0);
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), Padding::Valid).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn zero_input_gives_bias_everywhere() {
        let x = Tensor::zeros(&[7, 48, 1]);
        let k = Tensor::from_fn(&[3, 5, 1, 4], |i| (i as f64).sin());
        let b = Tensor::from_vec(vec![0.5, -1.0, 2.0, 0.0]);
        let y = conv2d_forward(&x, &k, &b, Padding::Same).unwrap();
        assert_eq!(y.shape(), &[7, 48, 4]);
        for (i, v) in y.data().iter().enumerate() {
            assert_eq!(*v, b.data()[i % 4]);
        }
    }

    #[test]
    fn same_padding_extra_goes_bottom_right() {
        // Even kernel of width 2: output column w sees input columns w and w + 1.
        let x = Tensor::new(&[1, 3, 1], vec![1.0, 10.0, 100.0]).unwrap();
        let k = Tensor::full(&[1, 2, 1, 1], 1.0);
        let y = conv2d_forward(&x, &k, &Tensor::zeros(&[1]), Padding::Same).unwrap();
        assert_eq!(y.data(), &[11.0, 110.0, 100.0]);
    }

    #[test]
    fn scalar_backward_is_chain_rule() {
        let (x, w, g) = (1.5, -0.25, 2.0);
        let grads = conv2d_backward(
            &Tensor::full(&[1, 1, 1], x),
            &Tensor::full(&[1, 1, 1, 1], w),
            &Tensor::full(&[1, 1, 1], g),
            Padding::Valid,
        )
        .unwrap();
        assert_eq!(grads.input.data(), &[g * w]);
        assert_eq!(grads.weights.data(), &[g * x]);
        assert_eq!(grads.bias.data(), &[g]);
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let x = Tensor::from_fn(&[4, 6, 2], |i| i as f64 * 0.1 - 1.0);
        let w = Tensor::from_fn(&[3, 1, 2, 3], |i| i as f64 * 0.2);
        let up = Tensor::zeros(&[4, 6, 3]);
        let g = conv2d_backward(&x, &w, &up, Padding::Same).unwrap();
        assert_eq!(g.input.max_abs(), 0.0);
        assert_eq!(g.weights.max_abs(), 0.0);
        assert_eq!(g.bias.max_abs(), 0.0);
    }

    #[test]
    fn bias_grad_sums_upstream_per_channel() {
        let x = Tensor::from_fn(&[3, 4, 1], |i| i as f64);
        let w = Tensor::full(&[1, 3, 1, 2], 0.5);
        let up = Tensor::from_fn(&[3, 4, 2], |i| i as f64);
        let g = conv2d_backward(&x, &w, &up, Padding::Same).unwrap();
        let even: f64 = (0..24).filter(|i| i % 2 == 0).map(|i| i as f64).sum();
        let odd: f64 = (0..24).filter(|i| i % 2 == 1).map(|i| i as f64).sum();
        assert_eq!(g.bias.data(), &[even, odd]);
    }

    #[test]
    fn shape_errors_name_the_dimension() {
        let x = Tensor::zeros(&[4, 4, 2]);
        let w = Tensor::zeros(&[3, 3, 3, 1]);
        let err = conv2d_forward(&x, &w, &Tensor::zeros(&[1]), Padding::Same).unwrap_err();
        assert!(err.to_string().contains("in_channels"), "{err}");

        let w = Tensor::zeros(&[5, 1, 2, 1]);
        let err = conv2d_forward(&x, &w, &Tensor::zeros(&[1]), Padding::Valid).unwrap_err();
        assert!(err.to_string().contains("kernel_height"), "{err}");

        let err = conv2d_forward(&Tensor::zeros(&[4, 4]), &w, &Tensor::zeros(&[1]), Padding::Same)
            .unwrap_err();
        assert!(matches!(err, TensorError::Rank { .. }));

        let w = Tensor::zeros(&[1, 1, 2, 1]);
        let err = conv2d_backward(&x, &w, &Tensor::zeros(&[4, 3, 1]), Padding::Same).unwrap_err();
        assert!(matches!(err, TensorError::ShapeMismatch { .. }));
    }

    #[test]
    fn first_layer_kernel_counts() {
        let spec = |kh, kw| ConvLayerSpec {
            kernel_height: kh,
            kernel_width: kw,
            in_channels: 1,
            out_channels: 16,
            padding: Padding::Same,
        };
        assert_eq!(kernel_elements(&spec(1, 7)) + kernel_elements(&spec(4, 1)), 11);
        assert_eq!(kernel_elements(&spec(4, 7)), 28);
        assert_eq!(spec(1, 7).param_count(), 7 * 16 + 16);
    }
}
