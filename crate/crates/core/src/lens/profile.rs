//! Per-document expert-choice profiles.
//!
//! For each layer the gate logits are summed over tokens and passed through a
//! softmax, giving one probability vector per layer; the profile is their
//! concatenation in layer order.

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{model_forward, ModelConfig, Params};
use crate::tensor::{softmax_in_place, Tensor};

/// How gate logits are pooled over tokens before the softmax.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Pooling {
    /// Literal sum over tokens. Softmax sharpness grows with length.
    #[default]
    Sum,
    /// Sum divided by the token count.
    Mean,
}

impl Pooling {
    pub fn name(self) -> &'static str {
        match self {
            Pooling::Sum => "sum",
            Pooling::Mean => "mean",
        }
    }
}

/// Expert-choice profile of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertChoiceProfile {
    pub label: String,
    /// One probability vector of length `num_experts` per layer.
    pub per_layer: Vec<Vec<f64>>,
}

impl ExpertChoiceProfile {
    /// Concatenation of the per-layer vectors, length `n_layers · e`.
    pub fn concat(&self) -> Vec<f64> {
        self.per_layer.concat()
    }
}

/// Column sums of `logits` that do not depend on row order: each column is
/// sorted before accumulation, so any permutation of tokens gives the same
/// bits.
fn order_free_column_sums(logits: &Tensor) -> Vec<f64> {
    let (l, e) = (logits.rows(), logits.cols());
    let mut col = Vec::with_capacity(l);
    (0..e)
        .map(|j| {
            col.clear();
            col.extend((0..l).map(|t| logits.at(t, j)));
            col.sort_by(f64::total_cmp);
            col.iter().sum()
        })
        .collect()
}

/// Builds the per-layer probability vectors from gate logits, one `l × e`
/// tensor per layer.
pub fn expert_profile(gate_logits: &[&Tensor], pooling: Pooling) -> Result<Vec<Vec<f64>>> {
    let first = gate_logits
        .first()
        .ok_or_else(|| Error::Invalid("no gate logits supplied".into()))?;
    let (l, e) = (first.rows(), first.cols());
    if l == 0 || e == 0 {
        return Err(Error::Shape(format!("gate logits of layer 0 are {l}×{e}")));
    }
    let mut out = Vec::with_capacity(gate_logits.len());
    for (i, g) in gate_logits.iter().enumerate() {
        if g.shape() != [l, e] {
            return Err(Error::Shape(format!(
                "layer {i} gate logits are {:?}, expected [{l}, {e}]",
                g.shape()
            )));
        }
        let mut v = order_free_column_sums(g);
        if pooling == Pooling::Mean {
            v.iter_mut().for_each(|x| *x /= l as f64);
        }
        softmax_in_place(&mut v);
        out.push(v);
    }
    Ok(out)
}

/// A token sequence tagged with its domain label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTokens {
    pub label: String,
    pub tokens: Vec<u32>,
}

/// Profiles of a labeled corpus.
#[derive(Debug, Clone)]
pub struct ProfileSet {
    pub profiles: Vec<ExpertChoiceProfile>,
    /// Number of empty documents that were skipped.
    pub skipped: usize,
    /// Number of documents cut down to the context length.
    pub truncated: usize,
}

impl ProfileSet {
    pub fn labels(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.label.clone()).collect()
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.profiles.iter().map(ExpertChoiceProfile::concat).collect()
    }
}

/// Runs the model over every document and returns their profiles in input
/// order. Documents longer than the context are truncated to its first
/// `context_len` tokens; empty documents are skipped and counted.
pub fn collect_profiles(
    params: &Params,
    cfg: &ModelConfig,
    docs: &[LabeledTokens],
    pooling: Pooling,
    exec: Exec,
) -> Result<ProfileSet> {
    let results = exec.map(docs, |doc| -> Result<Option<ExpertChoiceProfile>> {
        if doc.tokens.is_empty() {
            return Ok(None);
        }
        let n = doc.tokens.len().min(cfg.context_len);
        let out = model_forward(params, cfg, &doc.tokens[..n])?;
        let per_layer = expert_profile(&out.gate_logits(), pooling)?;
        Ok(Some(ExpertChoiceProfile {
            label: doc.label.clone(),
            per_layer,
        }))
    });
    let mut profiles = Vec::with_capacity(docs.len());
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(p) => profiles.push(p),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} empty document(s)");
    }
    let truncated = docs.iter().filter(|d| d.tokens.len() > cfg.context_len).count();
    if truncated > 0 {
        log::info!("truncated {truncated} document(s) to {} tokens", cfg.context_len);
    }
    Ok(ProfileSet {
        profiles,
        skipped,
        truncated,
    })
}
