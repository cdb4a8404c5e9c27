//! Sparse dispatch of tokens to SwiGLU experts.

use super::ops::{silu, silu_grad};
use super::params::ExpertParams;
use super::router::RouterDecision;
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b_acc, Tensor};

/// Per-expert activations kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ExpertCache {
    /// `(token, slot)` of each kept assignment, in token order.
    routes: Vec<(usize, usize)>,
    x: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    y: Vec<f64>,
}

/// One expert applied to a batch of rows `x` (`n × d`).
pub fn swiglu(x: &[f64], p: &ExpertParams) -> Vec<f64> {
    let (d, h) = (p.w1.rows(), p.w1.cols());
    let n = x.len() / d;
    let u = matmul(x, p.w1.data(), n, d, h);
    let w = matmul(x, p.w3.data(), n, d, h);
    let z: Vec<f64> = u.iter().zip(&w).map(|(a, b)| silu(*a) * b).collect();
    matmul(&z, p.w2.data(), n, h, d)
}

/// Weighted sum of the selected experts' outputs per token. Dropped
/// assignments contribute nothing and the remaining weights are not
/// renormalized; a fully dropped token gets a zero row.
pub fn moe_forward(h: &Tensor, decision: &RouterDecision, experts: &[ExpertParams]) -> Tensor {
    let (out, _) = moe_cached(h.data(), decision, experts);
    Tensor::from_vec(h.shape(), out).expect("l×d")
}

pub(crate) fn moe_cached(
    x: &[f64],
    decision: &RouterDecision,
    experts: &[ExpertParams],
) -> (Vec<f64>, Vec<ExpertCache>) {
    let d = experts[0].w1.rows();
    let hdim = experts[0].w1.cols();
    let l = x.len() / d;
    let mut routes: Vec<Vec<(usize, usize)>> = vec![Vec::new(); experts.len()];
    for t in 0..l {
        for (s, (&j, &dropped)) in decision
            .selected_for(t)
            .iter()
            .zip(decision.dropped_for(t))
            .enumerate()
        {
            if !dropped {
                routes[j].push((t, s));
            }
        }
    }
    let mut out = vec![0.0; l * d];
    let mut caches = Vec::with_capacity(experts.len());
    for (p, routes) in experts.iter().zip(routes) {
        let n = routes.len();
        let mut xs = Vec::with_capacity(n * d);
        for &(t, _) in &routes {
            xs.extend_from_slice(&x[t * d..(t + 1) * d]);
        }
        let u = matmul(&xs, p.w1.data(), n, d, hdim);
        let w = matmul(&xs, p.w3.data(), n, d, hdim);
        let z: Vec<f64> = u.iter().zip(&w).map(|(a, b)| silu(*a) * b).collect();
        let y = matmul(&z, p.w2.data(), n, hdim, d);
        for (r, &(t, s)) in routes.iter().enumerate() {
            let cw = decision.weights_for(t)[s];
            for (o, yi) in out[t * d..(t + 1) * d].iter_mut().zip(&y[r * d..(r + 1) * d]) {
                *o += cw * yi;
            }
        }
        caches.push(ExpertCache {
            routes,
            x: xs,
            u,
            w,
            y,
        });
    }
    (out, caches)
}

/// Backward through the experts and the combine weights.
///
/// Accumulates expert weight gradients, adds the combine-weight softmax
/// gradient into `dlogits` (`l × e`) and returns the input gradient. The
/// top-k selection is treated as constant.
pub(crate) fn moe_backward(
    dout: &[f64],
    decision: &RouterDecision,
    caches: &[ExpertCache],
    experts: &[ExpertParams],
    grads: &mut [ExpertParams],
    dlogits: &mut [f64],
) -> Vec<f64> {
    let d = experts[0].w1.rows();
    let hdim = experts[0].w1.cols();
    let (l, e, k) = (decision.num_tokens(), decision.num_experts(), decision.k);
    let mut dx = vec![0.0; l * d];
    let mut dcw = vec![0.0; l * k];
    for ((cache, p), g) in caches.iter().zip(experts).zip(grads.iter_mut()) {
        let n = cache.routes.len();
        if n == 0 {
            continue;
        }
        let mut dy = vec![0.0; n * d];
        for (r, &(t, s)) in cache.routes.iter().enumerate() {
            let cw = decision.weights_for(t)[s];
            let up = &dout[t * d..(t + 1) * d];
            let yr = &cache.y[r * d..(r + 1) * d];
            dcw[t * k + s] = yr.iter().zip(up).map(|(a, b)| a * b).sum();
            for (dyi, ui) in dy[r * d..(r + 1) * d].iter_mut().zip(up) {
                *dyi = cw * ui;
            }
        }
        let z: Vec<f64> = cache.u.iter().zip(&cache.w).map(|(a, b)| silu(*a) * b).collect();
        matmul_at_b_acc(&z, &dy, n, hdim, d, g.w2.data_mut());
        let dz = matmul_a_bt(&dy, p.w2.data(), n, hdim, d);
        let mut du = vec![0.0; n * hdim];
        let mut dw = vec![0.0; n * hdim];
        for i in 0..n * hdim {
            du[i] = dz[i] * cache.w[i] * silu_grad(cache.u[i]);
            dw[i] = dz[i] * silu(cache.u[i]);
        }
        matmul_at_b_acc(&cache.x, &du, n, d, hdim, g.w1.data_mut());
        matmul_at_b_acc(&cache.x, &dw, n, d, hdim, g.w3.data_mut());
        let dxs = matmul_a_bt(&du, p.w1.data(), n, d, hdim);
        let dxs3 = matmul_a_bt(&dw, p.w3.data(), n, d, hdim);
        for (r, &(t, _)) in cache.routes.iter().enumerate() {
            for i in 0..d {
                dx[t * d + i] += dxs[r * d + i] + dxs3[r * d + i];
            }
        }
    }
    for t in 0..l {
        let cw = decision.weights_for(t);
        let g = &dcw[t * k..(t + 1) * k];
        let mean: f64 = cw.iter().zip(g).map(|(a, b)| a * b).sum();
        for (s, &j) in decision.selected_for(t).iter().enumerate() {
            dlogits[t * e + j] += cw[s] * (g[s] - mean);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::router::route_logits;
    use crate::model::{ModelConfig, Params};

    #[test]
    fn single_expert_weight_one_is_plain_swiglu() {
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 3).unwrap();
        let experts = &p.layers[0].experts;
        let h = Tensor::from_vec(&[3, 32], (0..96).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let mut logits = vec![0.0; 3 * 4];
        for t in 0..3 {
            logits[t * 4 + 1] = 1.0;
        }
        let dec = route_logits(Tensor::from_vec(&[3, 4], logits).unwrap(), 1, 4.0);
        let out = moe_forward(&h, &dec, experts);
        let direct = swiglu(h.data(), &experts[1]);
        assert_eq!(out.data(), &direct[..]);
    }

    #[test]
    fn fully_dropped_token_gets_zero() {
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 3).unwrap();
        let h = Tensor::filled(&[4, 32], 0.5);
        let mut logits = vec![0.0; 16];
        for t in 0..4 {
            logits[t * 4 + 2] = 5.0;
        }
        let dec = route_logits(Tensor::from_vec(&[4, 4], logits).unwrap(), 1, 1.0);
        let out = moe_forward(&h, &dec, &p.layers[0].experts);
        assert!(out.row(0).iter().any(|&v| v != 0.0));
        for t in 1..4 {
            assert!(out.row(t).iter().all(|&v| v == 0.0));
        }
    }
}
