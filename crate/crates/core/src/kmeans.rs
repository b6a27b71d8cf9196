//! Lloyd's k-means with k-means++ seeding and independent restarts.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::{par, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Stop when inertia improves by less than this fraction.
    pub tolerance: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { restarts: 10, max_iterations: 300, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    /// k×d centroids, row-major.
    pub centroids: Vec<f64>,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub restart: usize,
}

struct Points<'a> {
    data: &'a [f64],
    dim: usize,
}

impl Points<'_> {
    fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the rows of `points` (n×d). Restart `r` draws from the stream
/// `(seed, r)`; the lowest-inertia restart wins, ties to the earliest.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult> {
    let (n, d) = points.shape();
    let row_major: Vec<f64> = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| points[(i, j)]).collect();
    kmeans_rows(&row_major, d, k, seed, config)
}

/// As [`kmeans`] for a row-major buffer of `d`-dimensional points.
pub fn kmeans_rows(data: &[f64], d: usize, k: usize, seed: u64, config: &KMeansConfig) -> Result<KMeansResult> {
    if d == 0 || data.len() % d != 0 {
        return domain("point buffer length must be a multiple of a positive dimension");
    }
    let pts = Points { data, dim: d };
    let n = pts.len();
    if k == 0 || k > n {
        return domain(format!("need 1 <= k <= n, got k = {k}, n = {n}"));
    }
    let restarts = config.restarts.max(1);
    let runs = par::map_range(restarts, |r| lloyd(&pts, k, rng::derive_seed(seed, &[r as u64]), config, r));
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart");
    Ok(best)
}

fn plus_plus_init<R: Rng>(pts: &Points, k: usize, r: &mut R) -> Vec<f64> {
    let n = pts.len();
    let d = pts.dim;
    let mut centroids = Vec::with_capacity(k * d);
    centroids.extend_from_slice(pts.get(r.random_range(0..n)));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(pts.get(i), &centroids[..d])).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = r.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // guard against rounding landing on a zero-weight tail
            if nearest[chosen] == 0.0 {
                chosen = nearest.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            r.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(pts.get(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(pts.get(i), &centroids[start..start + d]));
        }
    }
    centroids
}

fn assign(pts: &Points, centroids: &[f64], labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let d = pts.dim;
    let mut inertia = 0.0;
    for i in 0..pts.len() {
        let p = pts.get(i);
        let (mut best, mut best_d) = (0usize, f64::INFINITY);
        for (c, centroid) in centroids.chunks(d).enumerate() {
            let dist = sq_dist(p, centroid);
            if dist < best_d {
                best = c;
                best_d = dist;
            }
        }
        labels[i] = best;
        dists[i] = best_d;
        inertia += best_d;
    }
    inertia
}

fn lloyd(pts: &Points, k: usize, seed: u64, config: &KMeansConfig, restart: usize) -> KMeansResult {
    let n = pts.len();
    let d = pts.dim;
    let mut r = rng::seeded(seed);
    let mut centroids = plus_plus_init(pts, k, &mut r);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut inertia = assign(pts, &centroids, &mut labels, &mut dists);
    for _ in 0..config.max_iterations {
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = labels[i];
            counts[c] += 1;
            for (s, x) in sums[c * d..(c + 1) * d].iter_mut().zip(pts.get(i)) {
                *s += x;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..d {
                    centroids[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            } else {
                // empty cluster: move it onto the point farthest from its centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .unwrap_or(0);
                taken[far] = true;
                centroids[c * d..(c + 1) * d].copy_from_slice(pts.get(far));
                dists[far] = 0.0;
            }
        }
        let previous = inertia;
        let old_labels = labels.clone();
        inertia = assign(pts, &centroids, &mut labels, &mut dists);
        let stalled = previous - inertia <= config.tolerance * previous.max(f64::MIN_POSITIVE);
        if labels == old_labels || stalled {
            break;
        }
    }
    KMeansResult { labels, centroids, inertia, restart }
}
