//! Mixture-of-experts decoder with hand-written backward pass.
//!
//! Each layer is `x + attn(rmsnorm(x))` followed by `x + moe(rmsnorm(x))`.
//! The MoE block routes every token to its top-k experts by gate logit,
//! admits assignments in token order up to a per-expert capacity, and mixes
//! expert outputs with a softmax over the selected logits. Training
//! minimizes `lm_loss + α · aux_loss`, with the load-balancing term averaged
//! over layers.
//!
//! All arithmetic is `f64`; checkpoints store `f32`.

mod attention;
pub mod checkpoint;
mod config;
mod moe;
pub mod ops;
mod params;
pub mod router;
mod transformer;

pub use attention::attention_forward;
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use config::ModelConfig;
pub use moe::{moe_forward, swiglu};
pub use ops::{rmsnorm, rope_apply};
pub use params::{ExpertParams, LayerParams, Params};
pub use router::{aux_loss, expert_capacity, route, route_logits, RouterDecision};
pub use transformer::{batch_loss_and_grad, generate, model_backward, model_forward, BatchResult, ForwardOutput};
