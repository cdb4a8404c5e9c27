//! Top-k gating with capacity-limited dispatch and the load-balancing loss.

use crate::tensor::{matmul, softmax, softmax_in_place, Tensor};

/// Routing of one sequence through one MoE layer.
///
/// Per-token arrays are flattened with stride `k`: slot `s` of token `t` is
/// at `t * k + s`, and slot 0 holds the highest-scoring expert.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterDecision {
    /// Gate logits `h · W_g`, `l × e`.
    pub gate_logits: Tensor,
    pub k: usize,
    pub selected: Vec<usize>,
    /// Softmax over the k selected logits; sums to one per token before any
    /// drop masking.
    pub combine_weights: Vec<f64>,
    /// True where an assignment overflowed its expert's capacity.
    pub dropped: Vec<bool>,
    pub capacity: usize,
}

impl RouterDecision {
    pub fn num_tokens(&self) -> usize {
        self.gate_logits.rows()
    }

    pub fn num_experts(&self) -> usize {
        self.gate_logits.cols()
    }

    pub fn selected_for(&self, t: usize) -> &[usize] {
        &self.selected[t * self.k..(t + 1) * self.k]
    }

    pub fn weights_for(&self, t: usize) -> &[f64] {
        &self.combine_weights[t * self.k..(t + 1) * self.k]
    }

    pub fn dropped_for(&self, t: usize) -> &[bool] {
        &self.dropped[t * self.k..(t + 1) * self.k]
    }

    /// Kept assignments per expert, counting each token at most once.
    pub fn expert_load(&self) -> Vec<usize> {
        let mut load = vec![0; self.num_experts()];
        for (i, &j) in self.selected.iter().enumerate() {
            if !self.dropped[i] {
                load[j] += 1;
            }
        }
        load
    }

    /// Smallest gap between the k-th and (k+1)-th logit over all tokens;
    /// infinite when `k == e`. Small margins mean the selection can flip
    /// under tiny perturbations.
    pub fn min_topk_margin(&self) -> f64 {
        let e = self.num_experts();
        if self.k >= e {
            return f64::INFINITY;
        }
        (0..self.num_tokens())
            .map(|t| {
                let mut row = self.gate_logits.row(t).to_vec();
                row.sort_by(|a, b| b.total_cmp(a));
                row[self.k - 1] - row[self.k]
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `ceil(c · l · k / e)`.
pub fn expert_capacity(capacity_factor: f64, l: usize, k: usize, e: usize) -> usize {
    (capacity_factor * (l * k) as f64 / e as f64).ceil() as usize
}

/// Routes `h` (`l × d`) with gate weights `w_g` (`d × e`).
pub fn route(h: &Tensor, w_g: &Tensor, k: usize, capacity_factor: f64) -> RouterDecision {
    let (l, d) = (h.rows(), h.cols());
    let e = w_g.cols();
    let logits = matmul(h.data(), w_g.data(), l, d, e);
    route_logits(Tensor::from_vec(&[l, e], logits).expect("l×e"), k, capacity_factor)
}

/// Routing from precomputed gate logits.
///
/// Each token picks its `k` largest logits, ties going to the lower expert
/// index. Assignments are then admitted in token-position order until an
/// expert holds `capacity` tokens; later ones are marked dropped.
pub fn route_logits(gate_logits: Tensor, k: usize, capacity_factor: f64) -> RouterDecision {
    let (l, e) = (gate_logits.rows(), gate_logits.cols());
    let k = k.min(e);
    let capacity = expert_capacity(capacity_factor, l, k, e);
    let mut selected = Vec::with_capacity(l * k);
    let mut combine_weights = Vec::with_capacity(l * k);
    let mut dropped = Vec::with_capacity(l * k);
    let mut used = vec![0usize; e];
    let mut order: Vec<usize> = Vec::with_capacity(e);
    for t in 0..l {
        let row = gate_logits.row(t);
        order.clear();
        order.extend(0..e);
        // Stable sort keeps lower indices first among equal logits.
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let top = &order[..k];
        let mut w: Vec<f64> = top.iter().map(|&j| row[j]).collect();
        softmax_in_place(&mut w);
        for (&j, wj) in top.iter().zip(w) {
            selected.push(j);
            combine_weights.push(wj);
            if used[j] < capacity {
                used[j] += 1;
                dropped.push(false);
            } else {
                dropped.push(true);
            }
        }
    }
    RouterDecision {
        gate_logits,
        k,
        selected,
        combine_weights,
        dropped,
        capacity,
    }
}

/// Fraction of pre-drop assignments per expert (`f_j`) and mean full-softmax
/// gate probability per expert (`P_j`).
pub fn routing_statistics(decision: &RouterDecision) -> (Vec<f64>, Vec<f64>) {
    let (l, e, k) = (decision.num_tokens(), decision.num_experts(), decision.k);
    let mut f = vec![0.0; e];
    for &j in &decision.selected {
        f[j] += 1.0;
    }
    let total = (l * k) as f64;
    f.iter_mut().for_each(|x| *x /= total);
    let mut p = vec![0.0; e];
    for t in 0..l {
        for (pj, q) in p.iter_mut().zip(softmax(decision.gate_logits.row(t))) {
            *pj += q;
        }
    }
    p.iter_mut().for_each(|x| *x /= l as f64);
    (f, p)
}

/// Load-balancing loss `e · Σ_j f_j · P_j`. Equals 1 under perfectly uniform
/// routing and approaches `e` when every token goes to one expert with a
/// near one-hot gate.
pub fn aux_loss(decision: &RouterDecision) -> f64 {
    let e = decision.num_experts() as f64;
    let (f, p) = routing_statistics(decision);
    e * f.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>()
}

/// Adds `scale · ∂aux/∂logits` into `dlogits` (`l × e`). Assignment
/// fractions are piecewise constant and contribute no gradient.
pub(crate) fn aux_loss_backward(decision: &RouterDecision, scale: f64, dlogits: &mut [f64]) {
    let (l, e) = (decision.num_tokens(), decision.num_experts());
    let (f, _) = routing_statistics(decision);
    let g: Vec<f64> = f.iter().map(|fj| e as f64 * fj / l as f64).collect();
    for t in 0..l {
        let p = softmax(decision.gate_logits.row(t));
        let mean: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        for j in 0..e {
            dlogits[t * e + j] += scale * p[j] * (g[j] - mean);
        }
    }
}
