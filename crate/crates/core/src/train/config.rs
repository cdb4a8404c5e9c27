use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr_init: f64,
    pub total_steps: usize,
    #[serde(default)]
    pub warmup_steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub clip_norm: f64,
    /// Tokens per optimizer step; must be a multiple of `seq_len`.
    pub batch_tokens: usize,
    pub seq_len: usize,
    pub seed: u64,
}

fn default_adam_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    /// AdamW with β = (0.9, 0.95), weight decay 0.1, clipping at 1.0 and a
    /// peak learning rate of 3e-4 decaying to 3e-5; no warmup.
    fn default() -> Self {
        TrainConfig {
            lr_init: 3e-4,
            total_steps: 1000,
            warmup_steps: 0,
            beta1: 0.9,
            beta2: 0.95,
            adam_eps: default_adam_eps(),
            weight_decay: 0.1,
            clip_norm: 1.0,
            batch_tokens: 256,
            seq_len: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return fail("betas must lie in (0, 1)");
        }
        if !(self.lr_init >= 0.0) {
            return fail("lr_init must be non-negative");
        }
        if !(self.clip_norm > 0.0) {
            return fail("clip_norm must be positive");
        }
        if !(self.weight_decay >= 0.0) || !(self.adam_eps > 0.0) {
            return fail("weight_decay must be >= 0 and adam_eps > 0");
        }
        if self.total_steps > 0 && self.warmup_steps >= self.total_steps {
            return fail("warmup_steps must be smaller than total_steps");
        }
        if self.seq_len < 2 || self.batch_tokens < self.seq_len || self.batch_tokens % self.seq_len != 0 {
            return fail("batch_tokens must be a positive multiple of seq_len >= 2");
        }
        Ok(())
    }

    pub fn sequences_per_batch(&self) -> usize {
        self.batch_tokens / self.seq_len
    }

    /// Two-epoch recipe: the first pass at `lr_init = 3e-4`, the second at
    /// `3e-5`, everything else shared.
    pub fn two_epochs(base: &TrainConfig) -> [TrainConfig; 2] {
        let first = TrainConfig {
            lr_init: 3e-4,
            ..base.clone()
        };
        let second = TrainConfig {
            lr_init: 3e-5,
            ..base.clone()
        };
        [first, second]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.beta1, c.beta2, c.weight_decay, c.clip_norm), (0.9, 0.95, 0.1, 1.0));
    }

    #[test]
    fn rejects_invalid() {
        for f in [
            |c: &mut TrainConfig| c.beta1 = 1.0,
            |c: &mut TrainConfig| c.clip_norm = 0.0,
            |c: &mut TrainConfig| c.warmup_steps = 1000,
            |c: &mut TrainConfig| c.batch_tokens = 33,
        ] {
            let mut c = TrainConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }
}
