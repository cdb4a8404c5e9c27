use std::fmt::Write as _;

use super::config::TrainConfig;
use super::optim::{adamw_step, clip_grad_norm, OptimizerState};
use super::schedule::cosine_lr;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{batch_loss_and_grad, ModelConfig, Params};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub lm_loss: f64,
    pub aux_loss: f64,
    /// Pre-clip global gradient norm.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<StepRecord>,
    /// True when the token stream ran out before `total_steps`.
    pub exhausted: bool,
}

/// Trains `params` in place on a token stream.
///
/// Each step takes `batch_tokens / seq_len` consecutive non-overlapping
/// windows of `seq_len` tokens, evaluates `lm_loss + α·aux_loss`, clips the
/// gradient and applies AdamW at the cosine learning rate for that step. A
/// stream that cannot fill a whole batch ends training early; the partial
/// batch is discarded.
pub fn train<I>(
    params: &mut Params,
    model_cfg: &ModelConfig,
    tokens: I,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainOutcome>
where
    I: IntoIterator<Item = u32>,
{
    cfg.validate()?;
    model_cfg.validate()?;
    if cfg.seq_len > model_cfg.context_len {
        return Err(Error::ContextOverflow {
            len: cfg.seq_len,
            max: model_cfg.context_len,
        });
    }
    let mut stream = tokens.into_iter();
    let mut state = OptimizerState::new(model_cfg);
    let mut history = Vec::with_capacity(cfg.total_steps);
    let per_batch = cfg.sequences_per_batch();
    for step in 0..cfg.total_steps {
        let mut batch = Vec::with_capacity(per_batch);
        for _ in 0..per_batch {
            let window: Vec<u32> = stream.by_ref().take(cfg.seq_len).collect();
            if window.len() < cfg.seq_len {
                return Ok(TrainOutcome {
                    history,
                    exhausted: true,
                });
            }
            batch.push(window);
        }
        let lr = cosine_lr(step, cfg)?;
        let mut res = batch_loss_and_grad(params, model_cfg, &batch, exec)?;
        let grad_norm = clip_grad_norm(&mut res.grads, cfg.clip_norm)?;
        adamw_step(params, &res.grads, &mut state, lr, cfg)?;
        history.push(StepRecord {
            step,
            lr,
            lm_loss: res.lm_loss,
            aux_loss: res.aux_loss,
            grad_norm,
        });
    }
    Ok(TrainOutcome {
        history,
        exhausted: false,
    })
}

const HISTORY_HEADER: &str = "step,lr,lm_loss,aux_loss,grad_norm";

/// Comma-separated history with a header row. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_history_csv(history: &[StepRecord]) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(out, "{},{:?},{:?},{:?},{:?}", r.step, r.lr, r.lm_loss, r.aux_loss, r.grad_norm);
    }
    out
}

pub fn read_history_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(HISTORY_HEADER) {
        return Err(Error::Invalid("missing loss history header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Invalid(format!("bad history row {line:?}"));
            if f.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(StepRecord {
                step: f[0].parse().map_err(|_| bad())?,
                lr: num(f[1])?,
                lm_loss: num(f[2])?,
                aux_loss: num(f[3])?,
                grad_norm: num(f[4])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn micro() -> ModelConfig {
        ModelConfig {
            dim: 16,
            head_dim: 4,
            n_heads: 4,
            n_kv_heads: 4,
            ffn_hidden_dim: 16,
            vocab_size: 8,
            context_len: 16,
            ..ModelConfig::tiny()
        }
    }

    fn tc(steps: usize) -> TrainConfig {
        TrainConfig {
            total_steps: steps,
            batch_tokens: 16,
            seq_len: 8,
            lr_init: 1e-2,
            ..TrainConfig::default()
        }
    }

    fn pattern(n: usize) -> impl Iterator<Item = u32> {
        (0..n).map(|i| (i % 2) as u32 + 3)
    }

    #[test]
    fn exhaustion_stops_cleanly() {
        let cfg = micro();
        let mut p = Params::init(&cfg, 0).unwrap();
        // 5 steps need 80 tokens; 50 tokens fill three batches.
        let out = train(&mut p, &cfg, pattern(50), &tc(5), Exec::Sequential).unwrap();
        assert!(out.exhausted);
        assert_eq!(out.history.len(), 3);
    }

    #[test]
    fn zero_lr_keeps_loss_flat() {
        let cfg = micro();
        let mut p = Params::init(&cfg, 0).unwrap();
        let orig = p.clone();
        let mut c = tc(4);
        c.lr_init = 0.0;
        let out = train(&mut p, &cfg, pattern(1000), &c, Exec::Sequential).unwrap();
        assert_eq!(p, orig);
        let first = out.history[0].lm_loss;
        assert!(out.history.iter().all(|r| r.lm_loss == first));
    }

    #[test]
    fn zero_steps_is_a_no_op() {
        let cfg = micro();
        let mut p = Params::init(&cfg, 0).unwrap();
        let orig = p.clone();
        let out = train(&mut p, &cfg, pattern(100), &tc(0), Exec::Sequential).unwrap();
        assert!(out.history.is_empty());
        assert_eq!(p, orig);
    }

    #[test]
    fn history_csv_round_trip() {
        let h = vec![
            StepRecord {
                step: 0,
                lr: 3e-4,
                lm_loss: 6.2383,
                aux_loss: 1.0000000000000002,
                grad_norm: 0.1,
            },
            StepRecord {
                step: 1,
                lr: 2.9e-4,
                lm_loss: 5.0,
                aux_loss: 1.25,
                grad_norm: 3.0,
            },
        ];
        let csv = write_history_csv(&h);
        assert!(csv.starts_with("step,lr,lm_loss,aux_loss,grad_norm\n0,0.0003,"));
        assert_eq!(read_history_csv(&csv).unwrap(), h);
    }
}
