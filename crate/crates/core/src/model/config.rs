use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and routing hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub dim: usize,
    pub n_layers: usize,
    pub head_dim: usize,
    pub ffn_hidden_dim: usize,
    pub n_heads: usize,
    pub n_kv_heads: usize,
    pub context_len: usize,
    pub vocab_size: usize,
    pub num_experts: usize,
    pub topk_experts: usize,
    /// Weight of the load-balancing loss in the training objective.
    pub aux_loss_factor: f64,
    /// Expert capacity multiplier: each expert takes at most
    /// `ceil(capacity_factor * l * k / e)` tokens per sequence.
    pub capacity_factor: f64,
    #[serde(default = "default_rope_base")]
    pub rope_base: f64,
    #[serde(default = "default_norm_eps")]
    pub norm_eps: f64,
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

fn default_rope_base() -> f64 {
    10_000.0
}

fn default_norm_eps() -> f64 {
    1e-5
}

fn default_init_std() -> f64 {
    0.02
}

impl ModelConfig {
    /// Desk-scale preset used by tests and the bundled examples.
    pub fn tiny() -> Self {
        ModelConfig {
            dim: 32,
            n_layers: 2,
            head_dim: 8,
            ffn_hidden_dim: 64,
            n_heads: 4,
            n_kv_heads: 4,
            context_len: 128,
            vocab_size: 512,
            num_experts: 4,
            topk_experts: 2,
            aux_loss_factor: 0.02,
            capacity_factor: 1.0,
            rope_base: default_rope_base(),
            norm_eps: default_norm_eps(),
            init_std: default_init_std(),
        }
    }

    /// Full-size 18B-parameter configuration. Too large to instantiate at
    /// desk scale; useful for shape and bookkeeping checks.
    pub fn table1() -> Self {
        ModelConfig {
            dim: 3200,
            n_layers: 26,
            head_dim: 100,
            ffn_hidden_dim: 8640,
            n_heads: 32,
            n_kv_heads: 32,
            context_len: 8192,
            vocab_size: 32192,
            num_experts: 8,
            topk_experts: 2,
            aux_loss_factor: 0.02,
            capacity_factor: 1.0,
            rope_base: default_rope_base(),
            norm_eps: default_norm_eps(),
            init_std: default_init_std(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "tiny" => Ok(Self::tiny()),
            "table1" => Ok(Self::table1()),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected tiny or table1)"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dim == 0 || self.n_layers == 0 || self.ffn_hidden_dim == 0 || self.vocab_size == 0 {
            return fail("dim, n_layers, ffn_hidden_dim and vocab_size must be positive".into());
        }
        if self.head_dim * self.n_heads != self.dim {
            return fail(format!(
                "head_dim ({}) x n_heads ({}) != dim ({})",
                self.head_dim, self.n_heads, self.dim
            ));
        }
        if self.n_kv_heads != self.n_heads {
            return fail("grouped-query attention is not supported: n_kv_heads must equal n_heads".into());
        }
        if self.head_dim % 2 != 0 {
            return fail(format!("head_dim {} must be even for rotary embeddings", self.head_dim));
        }
        if self.topk_experts == 0 || self.topk_experts > self.num_experts {
            return fail(format!(
                "need 1 <= topk_experts ({}) <= num_experts ({})",
                self.topk_experts, self.num_experts
            ));
        }
        if !(self.aux_loss_factor >= 0.0) {
            return fail("aux_loss_factor must be >= 0".into());
        }
        if !(self.capacity_factor > 0.0) {
            return fail("capacity_factor must be > 0".into());
        }
        if self.context_len < 1 || !(self.norm_eps > 0.0) || !(self.rope_base > 0.0) {
            return fail("context_len, norm_eps and rope_base must be positive".into());
        }
        Ok(())
    }

    /// Total trainable parameters.
    pub fn param_count(&self) -> usize {
        let d = self.dim;
        let per_layer = 2 * d + 4 * d * d + d * self.num_experts + self.num_experts * 3 * d * self.ffn_hidden_dim;
        2 * self.vocab_size * d + d + self.n_layers * per_layer
    }
}
