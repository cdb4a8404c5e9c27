//! Row-wise kernels: RMSNorm, rotary embeddings, SiLU. Each forward has a
//! matching backward used by the training pass.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Normalizes each row of `x` (`l × d`) to unit root-mean-square and scales
/// by `gain`: `x / sqrt(mean(x²) + eps) ⊙ gain`.
pub fn rmsnorm(x: &Tensor, gain: &Tensor, eps: f64) -> Tensor {
    let d = gain.len();
    let (y, _) = rmsnorm_rows(x.data(), gain.data(), d, eps);
    Tensor::from_vec(x.shape(), y).expect("shape preserved")
}

/// Returns normalized rows and the per-row inverse RMS.
pub(crate) fn rmsnorm_rows(x: &[f64], gain: &[f64], d: usize, eps: f64) -> (Vec<f64>, Vec<f64>) {
    let l = x.len() / d;
    let mut y = vec![0.0; x.len()];
    let mut inv = vec![0.0; l];
    for t in 0..l {
        let row = &x[t * d..(t + 1) * d];
        let ms = row.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let r = 1.0 / (ms + eps).sqrt();
        inv[t] = r;
        for ((o, xi), g) in y[t * d..(t + 1) * d].iter_mut().zip(row).zip(gain) {
            *o = xi * r * g;
        }
    }
    (y, inv)
}

/// Backward of [`rmsnorm_rows`]: accumulates into `dgain` and returns `dx`.
pub(crate) fn rmsnorm_backward(
    x: &[f64],
    inv: &[f64],
    gain: &[f64],
    dy: &[f64],
    d: usize,
    dgain: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; x.len()];
    for (t, &r) in inv.iter().enumerate() {
        let xr = &x[t * d..(t + 1) * d];
        let dyr = &dy[t * d..(t + 1) * d];
        let mut proj = 0.0;
        for i in 0..d {
            dgain[i] += dyr[i] * xr[i] * r;
            proj += gain[i] * dyr[i] * xr[i];
        }
        let c = r * r * r * proj / d as f64;
        for i in 0..d {
            dx[t * d + i] = r * gain[i] * dyr[i] - c * xr[i];
        }
    }
    dx
}

/// Rotates channel pairs `(2j, 2j+1)` of every head by `pos · base^(-2j/head_dim)`.
///
/// `x` has shape `l × n_heads × head_dim`; `positions` must be strictly
/// increasing and have length `l`.
pub fn rope_apply(x: &Tensor, positions: &[usize], base: f64) -> Result<Tensor> {
    let shape = x.shape();
    if shape.len() != 3 {
        return Err(Error::Shape(format!("rope expects l×heads×head_dim, got {shape:?}")));
    }
    let (l, heads, hd) = (shape[0], shape[1], shape[2]);
    if hd % 2 != 0 {
        return Err(Error::Config(format!("head_dim {hd} must be even")));
    }
    if positions.len() != l {
        return Err(Error::Shape(format!("{} positions for {l} rows", positions.len())));
    }
    if positions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("positions must be strictly increasing".into()));
    }
    let mut data = x.data().to_vec();
    rope_rows(&mut data, positions, heads, hd, base, false);
    Tensor::from_vec(shape, data)
}

/// In-place rotation; `inverse` rotates by the negative angle, which is the
/// transpose and hence the backward map.
pub(crate) fn rope_rows(
    data: &mut [f64],
    positions: &[usize],
    heads: usize,
    hd: usize,
    base: f64,
    inverse: bool,
) {
    let half = hd / 2;
    let freqs: Vec<f64> = (0..half)
        .map(|j| base.powf(-2.0 * j as f64 / hd as f64))
        .collect();
    let d = heads * hd;
    for (t, &pos) in positions.iter().enumerate() {
        for (j, &f) in freqs.iter().enumerate() {
            let angle = pos as f64 * f;
            let (s, c) = angle.sin_cos();
            let s = if inverse { -s } else { s };
            for h in 0..heads {
                let i = t * d + h * hd + 2 * j;
                let (a, b) = (data[i], data[i + 1]);
                data[i] = a * c - b * s;
                data[i + 1] = a * s + b * c;
            }
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}
