//! Brute-force reference implementations, written against plain nested
//! vectors so they share no indexing code with the engine.

#![allow(dead_code)]

pub type Image = Vec<Vec<Vec<f64>>>; // [h][w][c]
pub type Kernel = Vec<Vec<Vec<Vec<f64>>>>; // [kh][kw][cin][cout]

pub fn image_from_flat(h: usize, w: usize, c: usize, data: &[f64]) -> Image {
    (0..h)
        .map(|i| (0..w).map(|j| (0..c).map(|k| data[(i * w + j) * c + k]).collect()).collect())
        .collect()
}

pub fn kernel_from_flat(kh: usize, kw: usize, cin: usize, cout: usize, data: &[f64]) -> Kernel {
    (0..kh)
        .map(|a| {
            (0..kw)
                .map(|b| {
                    (0..cin)
                        .map(|ci| (0..cout).map(|co| data[((a * kw + b) * cin + ci) * cout + co]).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn flatten(img: &Image) -> Vec<f64> {
    img.iter().flatten().flatten().copied().collect()
}

/// Cross-correlation with explicit zero padding (`top`, `left`) and output
/// size `oh x ow`.
fn correlate(x: &Image, k: &Kernel, bias: &[f64], top: isize, left: isize, oh: usize, ow: usize) -> Image {
    let (h, w) = (x.len() as isize, x[0].len() as isize);
    let cout = bias.len();
    let mut out = vec![vec![vec![0.0; cout]; ow]; oh];
    for i in 0..oh {
        for j in 0..ow {
            for co in 0..cout {
                let mut acc = bias[co];
                for (a, krow) in k.iter().enumerate() {
                    for (b, kcell) in krow.iter().enumerate() {
                        let y = i as isize + a as isize - top;
                        let z = j as isize + b as isize - left;
                        if y < 0 || z < 0 || y >= h || z >= w {
                            continue;
                        }
                        for (ci, kc) in kcell.iter().enumerate() {
                            acc += x[y as usize][z as usize][ci] * kc[co];
                        }
                    }
                }
                out[i][j][co] = acc;
            }
        }
    }
    out
}

pub fn conv_same(x: &Image, k: &Kernel, bias: &[f64]) -> Image {
    let (kh, kw) = (k.len() as isize, k[0].len() as isize);
    correlate(x, k, bias, (kh - 1) / 2, (kw - 1) / 2, x.len(), x[0].len())
}

pub fn conv_valid(x: &Image, k: &Kernel, bias: &[f64]) -> Image {
    let oh = x.len() + 1 - k.len();
    let ow = x[0].len() + 1 - k[0].len();
    correlate(x, k, bias, 0, 0, oh, ow)
}

/// Non-overlapping max pooling; remainders dropped.
pub fn maxpool(x: &Image, ph: usize, pw: usize) -> Image {
    let (oh, ow, c) = (x.len() / ph, x[0].len() / pw, x[0][0].len());
    let mut out = vec![vec![vec![f64::NEG_INFINITY; c]; ow]; oh];
    for i in 0..oh {
        for j in 0..ow {
            for ch in 0..c {
                for a in 0..ph {
                    for b in 0..pw {
                        let v = x[i * ph + a][j * pw + b][ch];
                        if v > out[i][j][ch] {
                            out[i][j][ch] = v;
                        }
                    }
                }
            }
        }
    }
    out
}
