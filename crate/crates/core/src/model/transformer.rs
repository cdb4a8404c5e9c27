//! Full decoder: embedding, N × (attention block, MoE block), final norm,
//! output head.

use super::attention::{attention_backward, attention_cached, AttnCache};
use super::config::ModelConfig;
use super::moe::{moe_backward, moe_cached, ExpertCache};
use super::ops::{rmsnorm_backward, rmsnorm_rows};
use super::params::Params;
use super::router::{aux_loss, aux_loss_backward, route_logits, RouterDecision};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::tensor::{matmul, matmul_a_bt, matmul_at_b_acc, softmax_in_place, Tensor};

#[derive(Debug, Clone)]
struct LayerTrace {
    x_in: Vec<f64>,
    attn_inv: Vec<f64>,
    attn: AttnCache,
    x_mid: Vec<f64>,
    ffn_inv: Vec<f64>,
    routed_in: Vec<f64>,
    experts: Vec<ExpertCache>,
}

#[derive(Debug, Clone)]
struct Trace {
    tokens: Vec<u32>,
    layers: Vec<LayerTrace>,
    x_final: Vec<f64>,
    final_inv: Vec<f64>,
    normed_final: Vec<f64>,
    probs: Vec<f64>,
}

/// Result of a forward pass over one sequence.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `l × vocab_size`.
    pub logits: Tensor,
    /// Mean next-token cross-entropy over the `l - 1` predicted positions;
    /// zero for a single-token sequence.
    pub lm_loss: f64,
    /// Load-balancing loss averaged over layers.
    pub aux_loss: f64,
    /// Routing decisions per layer; each holds that layer's gate logits.
    pub decisions: Vec<RouterDecision>,
    trace: Trace,
}

impl ForwardOutput {
    /// `lm_loss + α · aux_loss`.
    pub fn total_loss(&self, cfg: &ModelConfig) -> f64 {
        self.lm_loss + cfg.aux_loss_factor * self.aux_loss
    }

    /// Gate logits `g_i` per layer, `l × e` each.
    pub fn gate_logits(&self) -> Vec<&Tensor> {
        self.decisions.iter().map(|d| &d.gate_logits).collect()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.trace.tokens
    }
}

/// Runs the model over `tokens` at positions `0..l`.
pub fn model_forward(params: &Params, cfg: &ModelConfig, tokens: &[u32]) -> Result<ForwardOutput> {
    let l = tokens.len();
    if l == 0 {
        return Err(Error::Invalid("empty token sequence".into()));
    }
    if l > cfg.context_len {
        return Err(Error::ContextOverflow {
            len: l,
            max: cfg.context_len,
        });
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::UnknownId(bad));
    }
    let (d, v, e) = (cfg.dim, cfg.vocab_size, cfg.num_experts);
    let positions: Vec<usize> = (0..l).collect();

    let mut x = Vec::with_capacity(l * d);
    for &t in tokens {
        x.extend_from_slice(params.tok_embed.row(t as usize));
    }

    let mut layers = Vec::with_capacity(cfg.n_layers);
    let mut decisions = Vec::with_capacity(cfg.n_layers);
    let mut aux_total = 0.0;
    for lp in &params.layers {
        let (a, attn_inv) = rmsnorm_rows(&x, lp.attn_norm.data(), d, cfg.norm_eps);
        let (attn_out, attn) = attention_cached(&a, lp, cfg, &positions);
        let x_mid: Vec<f64> = x.iter().zip(&attn_out).map(|(p, q)| p + q).collect();
        let (b, ffn_inv) = rmsnorm_rows(&x_mid, lp.ffn_norm.data(), d, cfg.norm_eps);
        let g = matmul(&b, lp.gate.data(), l, d, e);
        let decision = route_logits(
            Tensor::from_vec(&[l, e], g).expect("l×e"),
            cfg.topk_experts,
            cfg.capacity_factor,
        );
        aux_total += aux_loss(&decision);
        let (moe_out, experts) = moe_cached(&b, &decision, &lp.experts);
        let x_out: Vec<f64> = x_mid.iter().zip(&moe_out).map(|(p, q)| p + q).collect();
        layers.push(LayerTrace {
            x_in: std::mem::replace(&mut x, x_out),
            attn_inv,
            attn,
            x_mid,
            ffn_inv,
            routed_in: b,
            experts,
        });
        decisions.push(decision);
    }

    let (f, final_inv) = rmsnorm_rows(&x, params.final_norm.data(), d, cfg.norm_eps);
    let logits = matmul(&f, params.output.data(), l, d, v);
    let mut probs = logits.clone();
    let mut lm = 0.0;
    for t in 0..l {
        let row = &mut probs[t * v..(t + 1) * v];
        softmax_in_place(row);
        if t + 1 < l {
            lm -= row[tokens[t + 1] as usize].ln();
        }
    }
    let lm_loss = if l > 1 { lm / (l - 1) as f64 } else { 0.0 };

    Ok(ForwardOutput {
        logits: Tensor::from_vec(&[l, v], logits).expect("l×v"),
        lm_loss,
        aux_loss: aux_total / cfg.n_layers as f64,
        decisions,
        trace: Trace {
            tokens: tokens.to_vec(),
            layers,
            x_final: x,
            final_inv,
            normed_final: f,
            probs,
        },
    })
}

/// Exact gradient of `lm_loss + α · aux_loss` with respect to every weight.
pub fn model_backward(out: &ForwardOutput, params: &Params, cfg: &ModelConfig) -> Params {
    let tr = &out.trace;
    let l = tr.tokens.len();
    let (d, v, e) = (cfg.dim, cfg.vocab_size, cfg.num_experts);
    let mut grads = Params::zeros(cfg);

    let mut dlogits = vec![0.0; l * v];
    if l > 1 {
        let inv_n = 1.0 / (l - 1) as f64;
        for t in 0..l - 1 {
            let row = &mut dlogits[t * v..(t + 1) * v];
            for (g, p) in row.iter_mut().zip(&tr.probs[t * v..(t + 1) * v]) {
                *g = p * inv_n;
            }
            row[tr.tokens[t + 1] as usize] -= inv_n;
        }
    }
    matmul_at_b_acc(&tr.normed_final, &dlogits, l, d, v, grads.output.data_mut());
    let df = matmul_a_bt(&dlogits, params.output.data(), l, d, v);
    let mut dx = rmsnorm_backward(
        &tr.x_final,
        &tr.final_inv,
        params.final_norm.data(),
        &df,
        d,
        grads.final_norm.data_mut(),
    );

    let aux_scale = cfg.aux_loss_factor / cfg.n_layers as f64;
    for (i, lt) in tr.layers.iter().enumerate().rev() {
        let lp = &params.layers[i];
        let decision = &out.decisions[i];
        let lg = &mut grads.layers[i];

        let mut dgate_logits = vec![0.0; l * e];
        let mut db = moe_backward(&dx, decision, &lt.experts, &lp.experts, &mut lg.experts, &mut dgate_logits);
        aux_loss_backward(decision, aux_scale, &mut dgate_logits);
        matmul_at_b_acc(&lt.routed_in, &dgate_logits, l, d, e, lg.gate.data_mut());
        for (a, b) in db.iter_mut().zip(matmul_a_bt(&dgate_logits, lp.gate.data(), l, d, e)) {
            *a += b;
        }
        let dmid = rmsnorm_backward(&lt.x_mid, &lt.ffn_inv, lp.ffn_norm.data(), &db, d, lg.ffn_norm.data_mut());
        for (a, b) in dx.iter_mut().zip(dmid) {
            *a += b;
        }

        let da = attention_backward(&dx, &lt.attn, lp, lg, cfg);
        let dres = rmsnorm_backward(&lt.x_in, &lt.attn_inv, lp.attn_norm.data(), &da, d, lg.attn_norm.data_mut());
        for (a, b) in dx.iter_mut().zip(dres) {
            *a += b;
        }
    }

    for (t, &tok) in tr.tokens.iter().enumerate() {
        let row = grads.tok_embed.row_mut(tok as usize);
        for (g, dv) in row.iter_mut().zip(&dx[t * d..(t + 1) * d]) {
            *g += dv;
        }
    }
    grads
}

/// Mean losses and gradients over a batch of equal-purpose sequences.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub lm_loss: f64,
    pub aux_loss: f64,
    pub grads: Params,
}

/// Forward and backward over every sequence, averaged. Sequences are
/// processed through `exec`; per-sequence gradients are summed in batch
/// order, so the result does not depend on the execution mode.
pub fn batch_loss_and_grad(
    params: &Params,
    cfg: &ModelConfig,
    batch: &[Vec<u32>],
    exec: Exec,
) -> Result<BatchResult> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let parts = exec.map(batch, |seq| {
        model_forward(params, cfg, seq).map(|out| {
            let g = model_backward(&out, params, cfg);
            (out.lm_loss, out.aux_loss, g)
        })
    });
    let mut grads = Params::zeros(cfg);
    let (mut lm, mut aux) = (0.0, 0.0);
    for part in parts {
        let (a, b, g) = part?;
        lm += a;
        aux += b;
        grads.add_assign(&g);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok(BatchResult {
        lm_loss: lm / n,
        aux_loss: aux / n,
        grads,
    })
}

/// Greedy argmax continuation of `prompt` (ties go to the lower id).
pub fn generate(params: &Params, cfg: &ModelConfig, prompt: &[u32], max_tokens: usize) -> Result<Vec<u32>> {
    if prompt.is_empty() {
        return Err(Error::Invalid("empty prompt".into()));
    }
    if prompt.len() + max_tokens > cfg.context_len {
        return Err(Error::ContextOverflow {
            len: prompt.len() + max_tokens,
            max: cfg.context_len,
        });
    }
    let mut seq = prompt.to_vec();
    for _ in 0..max_tokens {
        let out = model_forward(params, cfg, &seq)?;
        let last = out.logits.row(seq.len() - 1);
        let mut best = 0;
        for (i, &x) in last.iter().enumerate() {
            if x > last[best] {
                best = i;
            }
        }
        seq.push(best as u32);
    }
    Ok(seq)
}
