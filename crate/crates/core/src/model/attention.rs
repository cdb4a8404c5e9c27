//! Causal multi-head self-attention with rotary position embeddings.

use super::config::ModelConfig;
use super::ops::rope_rows;
use super::params::LayerParams;
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b_acc, Tensor};

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct AttnCache {
    input: Vec<f64>,
    positions: Vec<usize>,
    /// Rotated queries and keys, `l × d`.
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    /// Attention probabilities, `heads × l × l`, zero above the diagonal.
    probs: Vec<f64>,
    /// Concatenated head outputs before the output projection.
    o: Vec<f64>,
}

/// Attention over `x` (`l × d`) for the given positions.
pub fn attention_forward(x: &Tensor, layer: &LayerParams, cfg: &ModelConfig, positions: &[usize]) -> Tensor {
    let (out, _) = attention_cached(x.data(), layer, cfg, positions);
    Tensor::from_vec(x.shape(), out).expect("l×d")
}

pub(crate) fn attention_cached(
    x: &[f64],
    layer: &LayerParams,
    cfg: &ModelConfig,
    positions: &[usize],
) -> (Vec<f64>, AttnCache) {
    let d = cfg.dim;
    let (heads, hd) = (cfg.n_heads, cfg.head_dim);
    let l = x.len() / d;
    let mut q = matmul(x, layer.wq.data(), l, d, d);
    let mut k = matmul(x, layer.wk.data(), l, d, d);
    let v = matmul(x, layer.wv.data(), l, d, d);
    rope_rows(&mut q, positions, heads, hd, cfg.rope_base, false);
    rope_rows(&mut k, positions, heads, hd, cfg.rope_base, false);

    let scale = 1.0 / (hd as f64).sqrt();
    let mut probs = vec![0.0; heads * l * l];
    let mut o = vec![0.0; l * d];
    for h in 0..heads {
        let off = h * hd;
        for t in 0..l {
            let qt = &q[t * d + off..t * d + off + hd];
            let row = &mut probs[(h * l + t) * l..(h * l + t) * l + t + 1];
            let mut max = f64::NEG_INFINITY;
            for (s, p) in row.iter_mut().enumerate() {
                let ks = &k[s * d + off..s * d + off + hd];
                *p = qt.iter().zip(ks).map(|(a, b)| a * b).sum::<f64>() * scale;
                max = max.max(*p);
            }
            let mut sum = 0.0;
            for p in row.iter_mut() {
                *p = (*p - max).exp();
                sum += *p;
            }
            let ot = &mut o[t * d + off..t * d + off + hd];
            for (s, p) in row.iter_mut().enumerate() {
                *p /= sum;
                let vs = &v[s * d + off..s * d + off + hd];
                for (oi, vi) in ot.iter_mut().zip(vs) {
                    *oi += *p * vi;
                }
            }
        }
    }
    let out = matmul(&o, layer.wo.data(), l, d, d);
    let cache = AttnCache {
        input: x.to_vec(),
        positions: positions.to_vec(),
        q,
        k,
        v,
        probs,
        o,
    };
    (out, cache)
}

/// Accumulates weight gradients into `grads` and returns the input gradient.
pub(crate) fn attention_backward(
    dout: &[f64],
    cache: &AttnCache,
    layer: &LayerParams,
    grads: &mut LayerParams,
    cfg: &ModelConfig,
) -> Vec<f64> {
    let d = cfg.dim;
    let (heads, hd) = (cfg.n_heads, cfg.head_dim);
    let l = dout.len() / d;
    let scale = 1.0 / (hd as f64).sqrt();

    matmul_at_b_acc(&cache.o, dout, l, d, d, grads.wo.data_mut());
    let d_o = matmul_a_bt(dout, layer.wo.data(), l, d, d);

    let mut dq = vec![0.0; l * d];
    let mut dk = vec![0.0; l * d];
    let mut dv = vec![0.0; l * d];
    let mut dp = vec![0.0; l];
    for h in 0..heads {
        let off = h * hd;
        for t in 0..l {
            let p = &cache.probs[(h * l + t) * l..(h * l + t) * l + t + 1];
            let dot_t = &d_o[t * d + off..t * d + off + hd];
            let mut weighted = 0.0;
            for s in 0..=t {
                let vs = &cache.v[s * d + off..s * d + off + hd];
                dp[s] = dot_t.iter().zip(vs).map(|(a, b)| a * b).sum();
                weighted += p[s] * dp[s];
                for (dvi, g) in dv[s * d + off..s * d + off + hd].iter_mut().zip(dot_t) {
                    *dvi += p[s] * g;
                }
            }
            for s in 0..=t {
                let ds = p[s] * (dp[s] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                for i in 0..hd {
                    dq[t * d + off + i] += ds * cache.k[s * d + off + i];
                    dk[s * d + off + i] += ds * cache.q[t * d + off + i];
                }
            }
        }
    }
    rope_rows(&mut dq, &cache.positions, heads, hd, cfg.rope_base, true);
    rope_rows(&mut dk, &cache.positions, heads, hd, cfg.rope_base, true);

    let x = &cache.input;
    matmul_at_b_acc(x, &dq, l, d, d, grads.wq.data_mut());
    matmul_at_b_acc(x, &dk, l, d, d, grads.wk.data_mut());
    matmul_at_b_acc(x, &dv, l, d, d, grads.wv.data_mut());
    let mut dx = matmul_a_bt(&dq, layer.wq.data(), l, d, d);
    for (a, b) in dx.iter_mut().zip(matmul_a_bt(&dk, layer.wk.data(), l, d, d)) {
        *a += b;
    }
    for (a, b) in dx.iter_mut().zip(matmul_a_bt(&dv, layer.wv.data(), l, d, d)) {
        *a += b;
    }
    dx
}
