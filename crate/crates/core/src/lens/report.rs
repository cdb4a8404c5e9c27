//! Separation statistics for labeled profiles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean cosine distance between two labels (or within one, when equal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub a: String,
    pub b: String,
    pub mean_cosine_distance: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// Sorted distinct labels.
    pub labels: Vec<String>,
    pub counts: Vec<usize>,
    /// Every unordered label pair including `(a, a)`, in sorted order.
    pub pairs: Vec<PairDistance>,
    /// Pooled mean cosine distance over same-label pairs of distinct points.
    pub intra_mean: f64,
    /// Pooled mean cosine distance over different-label pairs.
    pub inter_mean: f64,
    /// Silhouette on the raw profiles with cosine distance.
    pub silhouette_raw: f64,
    /// Silhouette on the 3D embedding with Euclidean distance, when given.
    pub silhouette_embedding: Option<f64>,
}

/// `1 - cos(a, b)`; two zero vectors are at distance 0, a zero and a
/// non-zero vector at distance 1.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (1.0 - dot / (na * nb)).max(0.0)
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean silhouette coefficient. Points alone in their cluster score 0, as
/// does any point whose intra and nearest-cluster distances are both 0.
pub fn silhouette<D: Fn(usize, usize) -> f64>(cluster: &[usize], n_clusters: usize, dist: D) -> f64 {
    let n = cluster.len();
    if n == 0 {
        return 0.0;
    }
    let mut sizes = vec![0usize; n_clusters];
    for &c in cluster {
        sizes[c] += 1;
    }
    let mut total = 0.0;
    let mut sums = vec![0.0; n_clusters];
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if i != j {
                sums[cluster[j]] += dist(i, j);
            }
        }
        let own = cluster[i];
        if sizes[own] < 2 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..n_clusters)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

/// Cluster statistics for `profiles` grouped by `labels`.
///
/// Points are put into a canonical order first (by label, then by value),
/// so the report does not depend on the order of the input.
pub fn cluster_report(profiles: &[Vec<f64>], labels: &[String], embedding: Option<&[[f64; 3]]>) -> Result<ClusterReport> {
    let n = profiles.len();
    if labels.len() != n {
        return Err(Error::Shape(format!("{n} profiles but {} labels", labels.len())));
    }
    if let Some(e) = embedding {
        if e.len() != n {
            return Err(Error::Shape(format!("{n} profiles but {} embedded points", e.len())));
        }
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 labels, got {}", counts.len())));
    }
    if let Some((l, c)) = counts.iter().find(|(_, &c)| c < 2) {
        return Err(Error::Invalid(format!("label {l:?} has {c} point(s), need at least 2")));
    }
    let names: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        labels[i].cmp(&labels[j]).then_with(|| {
            let (a, b) = (&profiles[i], &profiles[j]);
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .then_with(|| match embedding {
            Some(e) => e[i]
                .iter()
                .zip(&e[j])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal),
            None => std::cmp::Ordering::Equal,
        })
    });
    let cluster: Vec<usize> = order.iter().map(|&i| index[labels[i].as_str()]).collect();
    let pts: Vec<&[f64]> = order.iter().map(|&i| profiles[i].as_slice()).collect();

    let k = names.len();
    let mut sum = vec![0.0; k * k];
    let mut cnt = vec![0usize; k * k];
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = cosine_distance(pts[i], pts[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
            let (a, b) = (cluster[i].min(cluster[j]), cluster[i].max(cluster[j]));
            sum[a * k + b] += d;
            cnt[a * k + b] += 1;
        }
    }
    let mut pairs = Vec::new();
    let (mut intra, mut intra_n, mut inter, mut inter_n) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..k {
        for b in a..k {
            let (s, c) = (sum[a * k + b], cnt[a * k + b]);
            pairs.push(PairDistance {
                a: names[a].clone(),
                b: names[b].clone(),
                mean_cosine_distance: if c > 0 { s / c as f64 } else { 0.0 },
                pairs: c,
            });
            if a == b {
                intra += s;
                intra_n += c;
            } else {
                inter += s;
                inter_n += c;
            }
        }
    }

    let silhouette_raw = silhouette(&cluster, k, |i, j| dist[i * n + j]);
    let silhouette_embedding = embedding.map(|e| {
        let pe: Vec<&[f64; 3]> = order.iter().map(|&i| &e[i]).collect();
        silhouette(&cluster, k, |i, j| euclidean(pe[i], pe[j]))
    });
    Ok(ClusterReport {
        counts: names.iter().map(|s| counts[s.as_str()]).collect(),
        labels: names,
        pairs,
        intra_mean: intra / intra_n as f64,
        inter_mean: inter / inter_n as f64,
        silhouette_raw,
        silhouette_embedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: &[(&str, usize)]) -> Vec<String> {
        counts.iter()
            .flat_map(|(l, c)| std::iter::repeat_n(l.to_string(), *c))
            .collect()
    }

    #[test]
    fn one_hot_groups_separate_perfectly() {
        let mut x = Vec::new();
        for _ in 0..5 {
            x.push(vec![1.0, 0.0, 0.0]);
        }
        for _ in 0..5 {
            x.push(vec![0.0, 0.0, 1.0]);
        }
        let r = cluster_report(&x, &labels(&[("a", 5), ("b", 5)]), None).unwrap();
        assert_eq!(r.intra_mean, 0.0);
        assert_eq!(r.inter_mean, 1.0);
        assert_eq!(r.silhouette_raw, 1.0);
    }

    #[test]
    fn identical_profiles_report_zeros() {
        let x = vec![vec![0.25; 4]; 6];
        let r = cluster_report(&x, &labels(&[("a", 3), ("b", 3)]), None).unwrap();
        assert_eq!((r.intra_mean, r.inter_mean, r.silhouette_raw), (0.0, 0.0, 0.0));
    }

    #[test]
    fn needs_two_labels_with_two_points() {
        let x = vec![vec![1.0]; 3];
        assert!(cluster_report(&x, &labels(&[("a", 3)]), None).is_err());
        assert!(cluster_report(&x, &labels(&[("a", 2), ("b", 1)]), None).is_err());
    }

    #[test]
    fn cosine_distance_edges() {
        assert_eq!(cosine_distance(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert_eq!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]), 1.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-15);
    }
}
