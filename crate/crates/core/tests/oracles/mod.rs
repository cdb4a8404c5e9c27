//! Independent reference computations used by the integration and
//! acceptance suites. Nothing here calls into the backward pass or the
//! sparse dispatch path it is meant to check.
#![allow(dead_code)]

use scidfm_core::model::{model_forward, ExpertParams, LayerParams, ModelConfig, Params, RouterDecision};
use scidfm_core::Tensor;

/// Total loss `lm + α·aux` at `params`.
pub fn total_loss(params: &Params, cfg: &ModelConfig, tokens: &[u32]) -> f64 {
    model_forward(params, cfg, tokens).unwrap().total_loss(cfg)
}

/// Central finite differences of the total loss for every parameter.
pub fn fd_gradients(params: &Params, cfg: &ModelConfig, tokens: &[u32], h: f64) -> Params {
    let mut work = params.clone();
    let mut out = Params::zeros(cfg);
    let n_tensors = work.tensors().len();
    for ti in 0..n_tensors {
        let len = work.tensors()[ti].len();
        for j in 0..len {
            let orig = work.tensors()[ti].data()[j];
            work.tensors_mut()[ti].data_mut()[j] = orig + h;
            let plus = total_loss(&work, cfg, tokens);
            work.tensors_mut()[ti].data_mut()[j] = orig - h;
            let minus = total_loss(&work, cfg, tokens);
            work.tensors_mut()[ti].data_mut()[j] = orig;
            out.tensors_mut()[ti].data_mut()[j] = (plus - minus) / (2.0 * h);
        }
    }
    out
}

/// Elementwise relative error `|a - n| / max(|a|, |n|, floor)`, maximized
/// over a tensor.
pub fn max_rel_error(analytic: &Tensor, numeric: &Tensor, floor: f64) -> f64 {
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// Expert output for a single row, by explicit loops.
pub fn expert_row(x: &[f64], p: &ExpertParams) -> Vec<f64> {
    let (d, h) = (p.w1.shape()[0], p.w1.shape()[1]);
    let mut z = vec![0.0; h];
    for j in 0..h {
        let mut u = 0.0;
        let mut w = 0.0;
        for i in 0..d {
            u += x[i] * p.w1.data()[i * h + j];
            w += x[i] * p.w3.data()[i * h + j];
        }
        z[j] = silu(u) * w;
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        for j in 0..h {
            y[i] += z[j] * p.w2.data()[j * d + i];
        }
    }
    y
}

/// Runs every expert on every token, then keeps only the routed,
/// non-dropped outputs weighted by their combine weights.
pub fn dense_moe(h: &Tensor, decision: &RouterDecision, experts: &[ExpertParams]) -> Tensor {
    let (l, d) = (h.shape()[0], h.shape()[1]);
    let all: Vec<Vec<Vec<f64>>> = (0..l)
        .map(|t| experts.iter().map(|p| expert_row(h.row(t), p)).collect())
        .collect();
    let mut out = Tensor::zeros(&[l, d]);
    for t in 0..l {
        for s in 0..decision.k {
            if decision.dropped_for(t)[s] {
                continue;
            }
            let j = decision.selected_for(t)[s];
            let w = decision.weights_for(t)[s];
            for i in 0..d {
                out.row_mut(t)[i] += w * all[t][j][i];
            }
        }
    }
    out
}

/// Causal RoPE attention by explicit per-score loops.
pub fn naive_attention(x: &Tensor, layer: &LayerParams, cfg: &ModelConfig) -> Tensor {
    let (l, d) = (x.shape()[0], cfg.dim);
    let (heads, hd) = (cfg.n_heads, cfg.head_dim);
    let proj = |w: &Tensor, t: usize| -> Vec<f64> {
        (0..d)
            .map(|j| (0..d).map(|i| x.row(t)[i] * w.data()[i * d + j]).sum())
            .collect()
    };
    let rotate = |v: &mut Vec<f64>, pos: usize| {
        for h in 0..heads {
            for j in 0..hd / 2 {
                let theta = cfg.rope_base.powf(-2.0 * j as f64 / hd as f64);
                let (s, c) = (pos as f64 * theta).sin_cos();
                let i = h * hd + 2 * j;
                let (a, b) = (v[i], v[i + 1]);
                v[i] = a * c - b * s;
                v[i + 1] = a * s + b * c;
            }
        }
    };
    let mut q: Vec<Vec<f64>> = (0..l).map(|t| proj(&layer.wq, t)).collect();
    let mut k: Vec<Vec<f64>> = (0..l).map(|t| proj(&layer.wk, t)).collect();
    let v: Vec<Vec<f64>> = (0..l).map(|t| proj(&layer.wv, t)).collect();
    for t in 0..l {
        rotate(&mut q[t], t);
        rotate(&mut k[t], t);
    }
    let mut concat = vec![vec![0.0; d]; l];
    for h in 0..heads {
        for t in 0..l {
            let scores: Vec<f64> = (0..=t)
                .map(|s| {
                    (0..hd).map(|i| q[t][h * hd + i] * k[s][h * hd + i]).sum::<f64>() / (hd as f64).sqrt()
                })
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
            for (s, sc) in scores.iter().enumerate() {
                let p = (sc - m).exp() / z;
                for i in 0..hd {
                    concat[t][h * hd + i] += p * v[s][h * hd + i];
                }
            }
        }
    }
    let mut out = Tensor::zeros(&[l, d]);
    for t in 0..l {
        for j in 0..d {
            out.row_mut(t)[j] = (0..d).map(|i| concat[t][i] * layer.wo.data()[i * d + j]).sum();
        }
    }
    out
}

/// Mean next-token cross-entropy recomputed from raw logits.
pub fn cross_entropy(logits: &Tensor, tokens: &[u32]) -> f64 {
    let l = tokens.len();
    let mut total = 0.0;
    for t in 0..l - 1 {
        let row = logits.row(t);
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - row[tokens[t + 1] as usize];
    }
    total / (l - 1) as f64
}

/// Micro configuration for per-element gradient checks.
pub fn micro_config() -> ModelConfig {
    ModelConfig {
        dim: 16,
        n_layers: 2,
        head_dim: 4,
        n_heads: 4,
        n_kv_heads: 4,
        ffn_hidden_dim: 16,
        context_len: 32,
        vocab_size: 24,
        num_experts: 4,
        topk_experts: 2,
        ..ModelConfig::tiny()
    }
}

/// First seed in `0..` whose initialization routes `tokens` with every
/// top-k margin above `min_margin` in every layer.
pub fn tie_free_seed(cfg: &ModelConfig, tokens: &[u32], min_margin: f64) -> (u64, Params) {
    for seed in 0..10_000 {
        let p = Params::init(cfg, seed).unwrap();
        let out = model_forward(&p, cfg, tokens).unwrap();
        if out.decisions.iter().all(|d| d.min_topk_margin() > min_margin) {
            return (seed, p);
        }
    }
    panic!("no tie-free initialization found");
}
