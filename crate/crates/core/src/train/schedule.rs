use std::f64::consts::PI;

use super::config::TrainConfig;
use crate::error::{Error, Result};

/// Learning rate at `step`: linear warmup to `lr_init`, then cosine decay to
/// `0.1 · lr_init`, reached exactly at `total_steps`.
pub fn cosine_lr(step: usize, cfg: &TrainConfig) -> Result<f64> {
    if step > cfg.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: cfg.total_steps,
        });
    }
    let peak = cfg.lr_init;
    if step < cfg.warmup_steps {
        return Ok(peak * step as f64 / cfg.warmup_steps as f64);
    }
    let span = cfg.total_steps - cfg.warmup_steps;
    if span == 0 {
        return Ok(peak);
    }
    let progress = (step - cfg.warmup_steps) as f64 / span as f64;
    // peak·(0.1 + 0.9·c) equals floor + (peak - floor)·c and hits both
    // endpoints without rounding: 0.1 + 0.9 == 1.0 in binary64.
    let c = 0.5 * (1.0 + (PI * progress).cos());
    Ok(peak * (0.1 + 0.9 * c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(total: usize, warmup: usize) -> TrainConfig {
        TrainConfig {
            total_steps: total,
            warmup_steps: warmup,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn endpoints_and_midpoint() {
        let c = cfg(1000, 0);
        assert_eq!(cosine_lr(0, &c).unwrap(), 3e-4);
        assert_eq!(cosine_lr(1000, &c).unwrap(), 0.1 * 3e-4);
        assert!((cosine_lr(500, &c).unwrap() - 1.65e-4).abs() < 1e-18);
        assert!(cosine_lr(1001, &c).is_err());
    }

    #[test]
    fn warmup_reaches_peak() {
        let c = cfg(100, 10);
        assert_eq!(cosine_lr(0, &c).unwrap(), 0.0);
        assert!((cosine_lr(5, &c).unwrap() - 1.5e-4).abs() < 1e-18);
        assert_eq!(cosine_lr(10, &c).unwrap(), 3e-4);
        assert_eq!(cosine_lr(100, &c).unwrap(), 0.1 * 3e-4);
    }

    #[test]
    fn non_increasing_after_warmup_with_exact_floor() {
        let c = cfg(777, 13);
        let lrs: Vec<f64> = (13..=777).map(|s| cosine_lr(s, &c).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        let min = lrs.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, 0.1 * c.lr_init);
        assert_eq!(*lrs.last().unwrap(), min);
        // Continuity: no jump larger than the steepest slope allows.
        let max_step = std::f64::consts::PI * 0.45 * c.lr_init / 764.0;
        assert!(lrs.windows(2).all(|w| w[0] - w[1] <= max_step * 1.0001));
    }
}
