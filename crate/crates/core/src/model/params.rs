use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One SwiGLU expert: `(silu(x·w1) ⊙ (x·w3))·w2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertParams {
    pub w1: Tensor,
    pub w3: Tensor,
    pub w2: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub attn_norm: Tensor,
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub ffn_norm: Tensor,
    /// Router weights `W_g`, `dim × num_experts`.
    pub gate: Tensor,
    pub experts: Vec<ExpertParams>,
}

/// All model weights. Projections are stored input-major so that a row
/// vector `x` maps to `x · W`. The output head is separate from the token
/// embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tok_embed: Tensor,
    pub layers: Vec<LayerParams>,
    pub final_norm: Tensor,
    pub output: Tensor,
}

impl Params {
    /// All-zero weights (gains included) with the shapes of `cfg`; used as a
    /// gradient accumulator.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (d, h, e, v) = (cfg.dim, cfg.ffn_hidden_dim, cfg.num_experts, cfg.vocab_size);
        Params {
            tok_embed: Tensor::zeros(&[v, d]),
            layers: (0..cfg.n_layers)
                .map(|_| LayerParams {
                    attn_norm: Tensor::zeros(&[d]),
                    wq: Tensor::zeros(&[d, d]),
                    wk: Tensor::zeros(&[d, d]),
                    wv: Tensor::zeros(&[d, d]),
                    wo: Tensor::zeros(&[d, d]),
                    ffn_norm: Tensor::zeros(&[d]),
                    gate: Tensor::zeros(&[d, e]),
                    experts: (0..e)
                        .map(|_| ExpertParams {
                            w1: Tensor::zeros(&[d, h]),
                            w3: Tensor::zeros(&[d, h]),
                            w2: Tensor::zeros(&[h, d]),
                        })
                        .collect(),
                })
                .collect(),
            final_norm: Tensor::zeros(&[d]),
            output: Tensor::zeros(&[d, v]),
        }
    }

    /// Scaled-normal initialization: N(0, init_std²) everywhere, with the
    /// residual output projections (`wo`, expert `w2`) further scaled by
    /// `1/sqrt(2·n_layers)`; norm gains start at one. Values are rounded to
    /// `f32` so a freshly initialized model survives a checkpoint round trip
    /// unchanged.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut p = Params::zeros(cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::Config(e.to_string()))?;
        let residual_scale = 1.0 / (2.0 * cfg.n_layers as f64).sqrt();
        for (name, t) in p.named_tensors_mut() {
            if name.ends_with("norm") {
                t.data_mut().iter_mut().for_each(|x| *x = 1.0);
                continue;
            }
            let scale = if name.ends_with(".wo") || name.ends_with(".w2") {
                residual_scale
            } else {
                1.0
            };
            for x in t.data_mut() {
                *x = ((normal.sample(&mut rng) * scale) as f32) as f64;
            }
        }
        Ok(p)
    }

    /// Tensors in canonical order with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("tok_embed".to_string(), &self.tok_embed)];
        for (i, l) in self.layers.iter().enumerate() {
            let p = format!("layers.{i}");
            out.push((format!("{p}.attn_norm"), &l.attn_norm));
            out.push((format!("{p}.wq"), &l.wq));
            out.push((format!("{p}.wk"), &l.wk));
            out.push((format!("{p}.wv"), &l.wv));
            out.push((format!("{p}.wo"), &l.wo));
            out.push((format!("{p}.ffn_norm"), &l.ffn_norm));
            out.push((format!("{p}.gate"), &l.gate));
            for (j, e) in l.experts.iter().enumerate() {
                out.push((format!("{p}.experts.{j}.w1"), &e.w1));
                out.push((format!("{p}.experts.{j}.w3"), &e.w3));
                out.push((format!("{p}.experts.{j}.w2"), &e.w2));
            }
        }
        out.push(("final_norm".to_string(), &self.final_norm));
        out.push(("output".to_string(), &self.output));
        out
    }

    /// Mutable counterpart of [`Params::named_tensors`], same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("tok_embed".to_string(), &mut self.tok_embed)];
        for (i, l) in self.layers.iter_mut().enumerate() {
            let p = format!("layers.{i}");
            out.push((format!("{p}.attn_norm"), &mut l.attn_norm));
            out.push((format!("{p}.wq"), &mut l.wq));
            out.push((format!("{p}.wk"), &mut l.wk));
            out.push((format!("{p}.wv"), &mut l.wv));
            out.push((format!("{p}.wo"), &mut l.wo));
            out.push((format!("{p}.ffn_norm"), &mut l.ffn_norm));
            out.push((format!("{p}.gate"), &mut l.gate));
            for (j, e) in l.experts.iter_mut().enumerate() {
                out.push((format!("{p}.experts.{j}.w1"), &mut e.w1));
                out.push((format!("{p}.experts.{j}.w3"), &mut e.w3));
                out.push((format!("{p}.experts.{j}.w2"), &mut e.w2));
            }
        }
        out.push(("final_norm".to_string(), &mut self.final_norm));
        out.push(("output".to_string(), &mut self.output));
        out
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.named_tensors_mut().into_iter().map(|(_, t)| t).collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    /// Whether a tensor participates in weight decay: matrices yes, norm
    /// gains no.
    pub fn decays(name: &str) -> bool {
        !name.ends_with("norm")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_shaped() {
        let cfg = ModelConfig::tiny();
        let a = Params::init(&cfg, 7).unwrap();
        let b = Params::init(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, Params::init(&cfg, 8).unwrap());
        assert_eq!(a.num_params(), cfg.param_count());
        assert!(a.final_norm.data().iter().all(|&g| g == 1.0));
        let names: Vec<_> = a.named_tensors().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 1 + cfg.n_layers * (7 + 3 * cfg.num_experts) + 2);
        assert!(a.tensors().iter().all(|t| t.data().iter().all(|&x| (x as f32) as f64 == x)));
    }

    #[test]
    fn residual_projections_are_scaled_down() {
        let cfg = ModelConfig::tiny();
        let p = Params::init(&cfg, 1).unwrap();
        let rms = |t: &Tensor| (t.sum_sq() / t.len() as f64).sqrt();
        let wq = rms(&p.layers[0].wq);
        let wo = rms(&p.layers[0].wo);
        assert!((wq - 0.02).abs() < 0.003);
        assert!((wo - 0.01).abs() < 0.002);
    }
}
