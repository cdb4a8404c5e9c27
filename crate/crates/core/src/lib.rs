//! Scientific-domain mixture-of-experts language modelling at desk scale.
//!
//! The crate is split along the pipeline:
//!
//! * [`tokenizer`] - BPE over prose plus single-token chemical atoms and amino
//!   acids inside identifier-wrapped entity spans.
//! * [`model`] - decoder-only transformer (RMSNorm, RoPE attention) whose
//!   feed-forward blocks are top-k gated SwiGLU experts with capacity-limited
//!   dispatch, with hand-written forward and backward passes.
//! * [`train`] - AdamW, cosine decay to 10% of peak, global-norm clipping and
//!   the training loop.
//! * [`lens`] - expert-choice profiles, exact t-SNE, cluster statistics and
//!   SVG scatter plots.
//!
//! Batch-level work (sequences in a training batch, documents during profile
//! collection, finite-difference sweeps, t-SNE rows) goes through [`exec`],
//! which uses rayon when the `parallel` feature is enabled and falls back to
//! plain iteration otherwise. Reductions always happen in input order, so
//! results are bit-identical across both modes.

pub mod error;
pub mod exec;
pub mod lens;
pub mod model;
pub mod synth;
pub mod tensor;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};
pub use exec::Exec;
pub use tensor::Tensor;
