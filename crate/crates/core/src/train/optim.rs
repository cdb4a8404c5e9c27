use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, Params};

/// Global L2 norm over every gradient tensor, accumulated in canonical
/// tensor order.
pub fn global_norm(grads: &Params) -> f64 {
    grads.tensors().iter().map(|t| t.sum_sq()).sum::<f64>().sqrt()
}

/// Scales all gradients by `clip_norm / norm` when the global norm exceeds
/// `clip_norm`. Returns the pre-clip norm.
pub fn clip_grad_norm(grads: &mut Params, clip_norm: f64) -> Result<f64> {
    if !(clip_norm > 0.0) {
        return Err(Error::Config("clip_norm must be positive".into()));
    }
    if let Some((name, _)) = grads.named_tensors().into_iter().find(|(_, t)| !t.is_finite()) {
        return Err(Error::NonFinite(format!("gradient {name}")));
    }
    let norm = global_norm(grads);
    if norm > clip_norm {
        grads.scale(clip_norm / norm);
    }
    Ok(norm)
}

/// AdamW moments and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub m: Params,
    pub v: Params,
    pub t: usize,
}

impl OptimizerState {
    pub fn new(cfg: &ModelConfig) -> Self {
        OptimizerState {
            m: Params::zeros(cfg),
            v: Params::zeros(cfg),
            t: 0,
        }
    }
}

/// One AdamW update with decoupled weight decay.
///
/// Decay multiplies decaying tensors by `1 - lr·wd` before the Adam step, so
/// a zero gradient shrinks them by exactly that factor. Nothing is written
/// unless every updated value is finite.
pub fn adamw_step(
    params: &mut Params,
    grads: &Params,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    let t = state.t + 1;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    let shrink = 1.0 - lr * cfg.weight_decay;

    let mut staged: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for ((((name, p), g), m), v) in params
        .named_tensors()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors())
        .zip(state.v.tensors())
    {
        if p.shape() != g.shape() {
            return Err(Error::Shape(format!("gradient for {name} has shape {:?}", g.shape())));
        }
        let decays = Params::decays(&name);
        let mut np = Vec::with_capacity(p.len());
        let mut nm = Vec::with_capacity(p.len());
        let mut nv = Vec::with_capacity(p.len());
        for i in 0..p.len() {
            let gi = g.data()[i];
            let mi = b1 * m.data()[i] + (1.0 - b1) * gi;
            let vi = b2 * v.data()[i] + (1.0 - b2) * gi * gi;
            let update = (mi / bc1) / ((vi / bc2).sqrt() + cfg.adam_eps);
            let mut theta = p.data()[i];
            if decays {
                theta *= shrink;
            }
            theta -= lr * update;
            if !theta.is_finite() || !vi.is_finite() {
                return Err(Error::NonFinite(format!("AdamW update of {name}")));
            }
            np.push(theta);
            nm.push(mi);
            nv.push(vi);
        }
        staged.push((np, nm, nv));
    }
    for (((p, m), v), (np, nm, nv)) in params
        .tensors_mut()
        .into_iter()
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut())
        .zip(staged)
    {
        p.data_mut().copy_from_slice(&np);
        m.data_mut().copy_from_slice(&nm);
        v.data_mut().copy_from_slice(&nv);
    }
    state.t = t;
    Ok(())
}
