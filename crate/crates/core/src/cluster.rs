//! K-means clustering (Lloyd's algorithm with k-means++ initialization),
//! SSE elbow curve, silhouette scoring, and silhouette-argmax k selection.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::seed::derive_seed;
use crate::vectorize::DocVector;

/// A fitted k-means clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Item ids in input order.
    pub item_ids: Vec<String>,
    /// Cluster index per item, aligned with `item_ids`.
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Total within-cluster squared distance at convergence.
    pub sse: f64,
    pub n_iterations: usize,
    /// SSE after each Lloyd iteration; non-increasing.
    pub sse_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn cluster_of(&self, item_id: &str) -> Option<usize> {
        self.item_ids
            .iter()
            .position(|id| id == item_id)
            .map(|i| self.assignment[i])
    }

    /// Indices of the items assigned to `cluster`.
    pub fn member_indices(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == cluster)
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

/// Elbow curve and silhouette table over a scanned k range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub sse_curve: Vec<(usize, f64)>,
    pub silhouette_scores: Vec<(usize, f64)>,
    pub chosen_k: usize,
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

/// k-means++ initialization: D²-weighted sampling of k distinct seeds.
fn kmeans_plusplus_init(
    vectors: &[DocVector],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centroids.push(vectors[first].values.clone());

    let mut min_d2: Vec<f64> = vectors
        .iter()
        .map(|v| dist2(&v.values, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                acc += d;
                if target < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass on already-chosen points; take the first
            // vector not yet used as a centroid.
            (0..n)
                .find(|&i| !centroids.contains(&vectors[i].values))
                .unwrap_or(0)
        };
        centroids.push(vectors[next].values.clone());
        for (i, v) in vectors.iter().enumerate() {
            let d = dist2(&v.values, centroids.last().unwrap());
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
    }
    centroids
}

/// Lloyd's algorithm seeded with k-means++.
///
/// Empty clusters are repaired by reseeding them with the point farthest
/// from its current centroid. At return every centroid equals the mean of
/// its members and `sse_history` is non-increasing.
pub fn kmeans(
    vectors: &[DocVector],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let n = vectors.len();
    if k == 0 {
        return Err(AuditError::KMeans("k must be >= 1".into()));
    }
    if k > n {
        return Err(AuditError::KMeans(format!("k={k} exceeds n={n}")));
    }
    let dim = vectors[0].values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plusplus_init(vectors, k, &mut rng);
    let mut assignment = vec![0usize; n];
    let mut sse_history: Vec<f64> = Vec::new();
    let mut n_iterations = 0;

    for _ in 0..max_iter.max(1) {
        n_iterations += 1;

        for (i, v) in vectors.iter().enumerate() {
            assignment[i] = nearest_centroid(&v.values, &centroids).0;
        }

        // Repair empty clusters with the worst-fit point.
        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        for cluster in 0..k {
            if counts[cluster] > 0 {
                continue;
            }
            let mut worst = None;
            let mut worst_d = -1.0;
            for (i, v) in vectors.iter().enumerate() {
                if counts[assignment[i]] <= 1 {
                    continue;
                }
                let d = dist2(&v.values, &centroids[assignment[i]]);
                if d > worst_d {
                    worst_d = d;
                    worst = Some(i);
                }
            }
            if let Some(i) = worst {
                counts[assignment[i]] -= 1;
                assignment[i] = cluster;
                counts[cluster] += 1;
            }
        }

        // Update centroids to member means.
        let mut new_centroids = vec![vec![0.0; dim]; k];
        for (i, v) in vectors.iter().enumerate() {
            for (acc, x) in new_centroids[assignment[i]].iter_mut().zip(&v.values) {
                *acc += x;
            }
        }
        for (cluster, centroid) in new_centroids.iter_mut().enumerate() {
            if counts[cluster] > 0 {
                let inv = 1.0 / counts[cluster] as f64;
                for x in centroid.iter_mut() {
                    *x *= inv;
                }
            }
        }

        let sse: f64 = vectors
            .iter()
            .zip(&assignment)
            .map(|(v, &c)| dist2(&v.values, &new_centroids[c]))
            .sum();
        if let Some(&prev) = sse_history.last() {
            assert!(
                sse <= prev + 1e-9 * prev.max(1.0),
                "SSE increased across Lloyd iteration: {prev} -> {sse}"
            );
        }
        sse_history.push(sse);

        let moved = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| dist2(a, b))
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        if moved <= tol * tol {
            break;
        }
    }

    let sse = *sse_history.last().unwrap();
    Ok(ClusterAssignment {
        k,
        item_ids: vectors.iter().map(|v| v.item_id.clone()).collect(),
        assignment,
        centroids,
        sse,
        n_iterations,
        sse_history,
    })
}

/// Best of `restarts` seeded runs, by final SSE (ties keep the earlier
/// restart).
pub fn best_kmeans(
    vectors: &[DocVector],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterAssignment> {
    let mut best: Option<ClusterAssignment> = None;
    for r in 0..restarts.max(1) {
        let run_seed = derive_seed(seed, "kmeans", &[k as u64, r as u64]);
        let run = kmeans(vectors, k, run_seed, max_iter, tol)?;
        best = match best {
            None => Some(run),
            Some(b) if run.sse < b.sse => Some(run),
            some => some,
        };
    }
    Ok(best.unwrap())
}

/// SSE-vs-k elbow curve with best-of-restarts per k.
pub fn sse_curve(
    vectors: &[DocVector],
    k_range: impl IntoIterator<Item = usize>,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Vec<(usize, f64)>> {
    let mut curve = Vec::new();
    for k in k_range {
        let run = best_kmeans(vectors, k, seed, restarts, max_iter, tol)?;
        curve.push((k, run.sse));
    }
    Ok(curve)
}

fn silhouette_from_sums(
    sums: &[f64],
    k: usize,
    sizes: &[usize],
    assignment: &[usize],
) -> f64 {
    let n = assignment.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = assignment[i];
        if sizes[own] <= 1 {
            // Singleton clusters contribute 0.
            continue;
        }
        let a = sums[i * k + own] / (sizes[own] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own && sizes[c] > 0 {
                b = b.min(sums[i * k + c] / sizes[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
        // a == b == 0 contributes 0 by convention.
    }
    total / n as f64
}

/// Mean silhouette over all points (Euclidean distance, full pairwise).
///
/// Singletons contribute 0, as does the 0/0 case where a point is at zero
/// distance from both its own and the nearest other cluster.
pub fn silhouette(vectors: &[DocVector], assignment: &ClusterAssignment) -> Result<f64> {
    Ok(silhouette_multi(vectors, std::slice::from_ref(assignment))?[0])
}

/// Silhouette for several clusterings of the same vectors in one pairwise
/// pass; the pair distances dominate the cost and are shared across runs.
pub fn silhouette_multi(
    vectors: &[DocVector],
    assignments: &[impl std::borrow::Borrow<ClusterAssignment>],
) -> Result<Vec<f64>> {
    let n = vectors.len();
    for a in assignments {
        let a = a.borrow();
        if a.k < 2 || a.k > n.saturating_sub(1) {
            return Err(AuditError::SilhouetteRange { k: a.k, n });
        }
        if a.cluster_sizes().iter().any(|&s| s == 0) {
            return Err(AuditError::KMeans("empty cluster in silhouette input".into()));
        }
    }
    let mut sums: Vec<Vec<f64>> = assignments
        .iter()
        .map(|a| vec![0.0; n * a.borrow().k])
        .collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist2(&vectors[i].values, &vectors[j].values).sqrt();
            for (s, a) in sums.iter_mut().zip(assignments) {
                let a = a.borrow();
                s[i * a.k + a.assignment[j]] += d;
                s[j * a.k + a.assignment[i]] += d;
            }
        }
    }
    Ok(assignments
        .iter()
        .zip(&sums)
        .map(|(a, s)| {
            let a = a.borrow();
            silhouette_from_sums(s, a.k, &a.cluster_sizes(), &a.assignment)
        })
        .collect())
}

/// Argmax over (k, silhouette) rows; ties break toward smaller k.
pub fn argmax_silhouette(scores: &[(usize, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, s) in scores {
        best = match best {
            None => Some((k, s)),
            Some((bk, bs)) if s > bs || (s == bs && k < bk) => Some((k, s)),
            some => some,
        };
    }
    best.map(|(k, _)| k)
}

/// Scans `k_range`, scores each clustering by silhouette, and returns the
/// selection summary plus the winning clustering. The SSE curve additionally
/// covers k = 1 for elbow reporting.
pub fn select_k_detailed(
    vectors: &[DocVector],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<(KSelection, ClusterAssignment)> {
    let n = vectors.len();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi > n.saturating_sub(1) || lo > hi {
        return Err(AuditError::SilhouetteRange { k: lo.min(hi), n });
    }
    let mut runs = Vec::new();
    for k in lo..=hi {
        runs.push(best_kmeans(vectors, k, seed, restarts, max_iter, tol)?);
    }
    let scores = silhouette_multi(vectors, &runs)?;
    let silhouette_scores: Vec<(usize, f64)> =
        runs.iter().map(|r| r.k).zip(scores.iter().copied()).collect();
    let chosen_k = argmax_silhouette(&silhouette_scores)
        .ok_or_else(|| AuditError::KMeans("empty k range".into()))?;

    let mut curve = vec![{
        let run = best_kmeans(vectors, 1, seed, restarts, max_iter, tol)?;
        (1, run.sse)
    }];
    curve.extend(runs.iter().map(|r| (r.k, r.sse)));

    let chosen = runs
        .into_iter()
        .find(|r| r.k == chosen_k)
        .expect("chosen k came from the scanned runs");
    Ok((
        KSelection {
            sse_curve: curve,
            silhouette_scores,
            chosen_k,
        },
        chosen,
    ))
}

/// As [`select_k_detailed`], returning just the selection summary.
pub fn select_k(
    vectors: &[DocVector],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
    max_iter: usize,
    tol: f64,
) -> Result<KSelection> {
    select_k_detailed(vectors, k_range, seed, restarts, max_iter, tol).map(|(sel, _)| sel)
}
