//! Exact t-SNE to three dimensions.
//!
//! Input affinities are Gaussian with a per-point bandwidth found by
//! bisection on the entropy, then symmetrized. The output kernel is a
//! Student-t with one degree of freedom. Optimization is plain gradient
//! descent with momentum and an early exaggeration phase, starting from the
//! top three principal components. There are no per-coordinate gains, so
//! the updates commute with rotations and symmetric inputs stay symmetric.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TsneConfig {
    /// Requested perplexity; capped at `(n - 1) / 3`.
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    /// Defaults to `n / 12` when unset.
    pub learning_rate: Option<f64>,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    /// Seeds the jitter used for principal directions with no variance.
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: None,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingResult {
    pub coords: Vec<[f64; 3]>,
    /// KL(P || Q) at the start of every iteration, plus the final value.
    pub kl_history: Vec<f64>,
    pub seed: u64,
    /// Perplexity actually used after capping.
    pub perplexity: f64,
}

impl EmbeddingResult {
    pub fn final_kl(&self) -> f64 {
        *self.kl_history.last().unwrap_or(&f64::NAN)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Largest admissible perplexity for `n` points.
pub fn max_perplexity(n: usize) -> f64 {
    (n as f64 - 1.0) / 3.0
}

/// Conditional distribution of one row at precision `beta`, and its entropy
/// in nats. `d` holds squared distances to the other points.
fn row_distribution(d: &[f64], beta: f64, out: &mut [f64]) -> f64 {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for (p, &dj) in out.iter_mut().zip(d) {
        *p = (-beta * (dj - dmin)).exp();
        sum += *p;
        weighted += *p * (dj - dmin);
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
    sum.ln() + beta * weighted / sum
}

/// Fills `row` with the conditional distribution whose entropy is closest
/// to `target` nats. Entropy falls monotonically as the precision grows, so
/// the precision is bracketed by doubling and then bisected.
fn calibrate_row(d: &[f64], target: f64, row: &mut [f64]) -> f64 {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let mut beta = 1.0;
    let mut h = row_distribution(d, beta, row);
    for _ in 0..200 {
        if (h - target).abs() < 1e-10 {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        h = row_distribution(d, beta, row);
    }
    h
}

/// Symmetric, zero-diagonal input affinity matrix (row-major `n × n`)
/// summing to one.
///
/// A row whose exact duplicates number at least the perplexity cannot reach
/// the target entropy at any bandwidth; such rows are reported together in
/// the error. Rows that are merely equidistant from all others saturate at
/// the uniform distribution and are accepted.
pub fn input_affinities(x: &[Vec<f64>], perplexity: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Invalid(format!("need at least two points, got {n}")));
    }
    if !(perplexity > 0.0) {
        return Err(Error::Invalid(format!("perplexity must be positive, got {perplexity}")));
    }
    let target = perplexity.ln();
    let mut infeasible = Vec::new();
    let mut cond = vec![0.0; n * n];
    let mut d = vec![0.0; n - 1];
    let mut row = vec![0.0; n - 1];
    for i in 0..n {
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            d[slot] = sq_dist(&x[i], &x[j]);
        }
        let duplicates = d.iter().filter(|&&v| v == 0.0).count();
        if duplicates > 0 && duplicates as f64 >= perplexity {
            infeasible.push(i);
            continue;
        }
        calibrate_row(&d, target, &mut row);
        for (slot, j) in (0..n).filter(|&j| j != i).enumerate() {
            cond[i * n + j] = row[slot];
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::Perplexity { rows: infeasible });
    }
    let mut p = vec![0.0; n * n];
    let denom = 2.0 * n as f64;
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
        }
    }
    Ok(p)
}

/// Top-three principal component scores scaled to a small spread. Axes with
/// no variance (or missing because the input has fewer than three
/// dimensions) are filled with seeded Gaussian jitter of the same scale.
fn pca_init(x: &[Vec<f64>], seed: u64) -> Vec<[f64; 3]> {
    let (n, dim) = (x.len(), x[0].len());
    let mean: Vec<f64> = (0..dim)
        .map(|c| x.iter().map(|r| r[c]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, dim, |r, c| x[r][c] - mean[c]);
    let cov = centered.transpose() * &centered / n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut coords = vec![[0.0; 3]; n];
    let mut live = [false; 3];
    for (axis, &k) in order.iter().take(3).enumerate() {
        if eig.eigenvalues[k] <= 1e-12 * top || top == 0.0 {
            continue;
        }
        let mut v = eig.eigenvectors.column(k).into_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let pivot = v.iter().copied().fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
        if pivot < 0.0 {
            v = -v;
        }
        let scores = &centered * v;
        for (c, s) in coords.iter_mut().zip(scores.iter()) {
            c[axis] = *s;
        }
        live[axis] = true;
    }
    // Scale so the first axis has standard deviation 1e-4.
    let scale = if live[0] {
        let sd = (coords.iter().map(|c| c[0] * c[0]).sum::<f64>() / n as f64).sqrt();
        1e-4 / sd
    } else {
        1.0
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, 1e-4).expect("valid normal");
    for c in coords.iter_mut() {
        for axis in 0..3 {
            c[axis] = if live[axis] {
                c[axis] * scale
            } else {
                jitter.sample(&mut rng)
            };
        }
    }
    coords
}

/// Unnormalized Student-t kernel matrix and its sum.
fn kernel(y: &[[f64; 3]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = 1.0 / (1.0 + sq_dist(&y[i], &y[j]));
                num[i * n + j] = q;
                z += q;
            }
        }
    }
    (num, z)
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &q)| pij * (pij / (q / z).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Embeds the rows of `x` in three dimensions.
pub fn tsne_reduce(x: &[Vec<f64>], cfg: &TsneConfig) -> Result<EmbeddingResult> {
    let n = x.len();
    if n < 4 {
        return Err(Error::Invalid(format!("t-SNE needs at least 4 points, got {n}")));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(Error::Shape("t-SNE input rows must share a non-zero length".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE input".into()));
    }
    let perplexity = cfg.perplexity.min(max_perplexity(n));
    if perplexity < cfg.perplexity {
        log::info!("perplexity capped from {} to {perplexity} for {n} points", cfg.perplexity);
    }
    let p = input_affinities(x, perplexity)?;
    let lr = cfg.learning_rate.unwrap_or(n as f64 / 12.0);

    let mut y = pca_init(x, cfg.seed);
    let mut velocity = vec![[0.0; 3]; n];
    let mut kl_history = Vec::with_capacity(cfg.iterations + 1);
    let mut grad = vec![[0.0; 3]; n];
    for it in 0..cfg.iterations {
        let (num, z) = kernel(&y);
        kl_history.push(kl_divergence(&p, &num, z));
        let (exag, momentum) = if it < cfg.exaggeration_iters {
            (cfg.exaggeration, cfg.initial_momentum)
        } else {
            (1.0, cfg.final_momentum)
        };
        for i in 0..n {
            let mut g = [0.0; 3];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let q = num[i * n + j];
                let coef = (exag * p[i * n + j] - q / z) * q;
                for a in 0..3 {
                    g[a] += coef * (y[i][a] - y[j][a]);
                }
            }
            grad[i] = g.map(|v| 4.0 * v);
        }
        for i in 0..n {
            for a in 0..3 {
                velocity[i][a] = momentum * velocity[i][a] - lr * grad[i][a];
                y[i][a] += velocity[i][a];
            }
        }
        // Keep the embedding centred.
        for a in 0..3 {
            let m = y.iter().map(|r| r[a]).sum::<f64>() / n as f64;
            y.iter_mut().for_each(|r| r[a] -= m);
        }
    }
    let (num, z) = kernel(&y);
    kl_history.push(kl_divergence(&p, &num, z));
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE coordinates".into()));
    }
    Ok(EmbeddingResult {
        coords: y,
        kl_history,
        seed: cfg.seed,
        perplexity,
    })
}
