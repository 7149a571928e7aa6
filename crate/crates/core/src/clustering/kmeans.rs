//! Lloyd's K-means with D²-weighted seeding and best-of-N restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_k, cluster_means, sq_dist, wcss, ClusteringResult, Clusterer};
use crate::error::Result;
use crate::ingest::FeatureMatrix;

pub const MAX_ITER: usize = 300;
/// Convergence threshold on the largest centroid displacement.
pub const MOVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub seed: u64,
    pub restarts: usize,
}

impl KMeans {
    pub fn new(seed: u64, restarts: usize) -> Self {
        Self {
            seed,
            restarts: restarts.max(1),
        }
    }
}

impl Clusterer for KMeans {
    fn name(&self) -> &str {
        "kmeans"
    }

    fn fit(&self, data: &FeatureMatrix, k: usize) -> Result<ClusteringResult> {
        kmeans(data, k, self.seed, self.restarts)
    }
}

/// One Lloyd run from a single seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
    pub iterations: usize,
    /// Objective after each centroid update.
    pub objective_trace: Vec<f64>,
}

/// Best of `restarts` independent runs. Restart `r` draws from stream `r`
/// of a ChaCha8 generator seeded with `seed`; ties in WCSS go to the lowest
/// restart index, so the result does not depend on thread scheduling.
pub fn kmeans(data: &FeatureMatrix, k: usize, seed: u64, restarts: usize) -> Result<ClusteringResult> {
    check_k(data, k)?;
    let runs: Vec<LloydRun> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            lloyd(data, k, &mut rng)
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.wcss < best.wcss { run } else { best })
        .expect("at least one restart");
    Ok(ClusteringResult {
        method: "kmeans".into(),
        k,
        labels: best.labels,
        centroids: best.centroids,
        wcss: best.wcss,
        dendrogram: None,
    })
}

/// Runs Lloyd iterations until no centroid moves more than [`MOVE_TOL`] or
/// [`MAX_ITER`] iterations have run. Requires `1 <= k <= rows`.
pub fn lloyd<R: Rng>(data: &FeatureMatrix, k: usize, rng: &mut R) -> LloydRun {
    let n = data.rows();
    let mut centroids = seed_centroids(data, k, rng);
    let mut labels = vec![0usize; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    for _ in 0..MAX_ITER {
        iterations += 1;
        assign(data, &centroids, &mut labels);
        fill_empty(data, &mut centroids, &mut labels);
        let updated = cluster_means(data, &labels, k);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0, f64::max)
            .sqrt();
        let objective = wcss(data, &labels, &updated);
        if let Some(&prev) = trace.last() {
            debug_assert!(
                objective <= prev + 1e-9 * (1.0 + prev),
                "k-means objective increased: {prev} -> {objective}"
            );
        }
        trace.push(objective);
        centroids = updated;
        if shift <= MOVE_TOL {
            break;
        }
    }

    let wcss = wcss(data, &labels, &centroids);
    LloydRun {
        labels,
        centroids,
        wcss,
        iterations,
        objective_trace: trace,
    }
}

/// D²-weighted seeding over the data points. When every remaining point
/// coincides with a chosen centre, picks uniformly among unchosen indices.
fn seed_centroids<R: Rng>(data: &FeatureMatrix, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![data.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        let c = data.row(pick).to_vec();
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(sq_dist(data.row(i), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest centroid per point; ties go to the lowest centroid index.
fn assign(data: &FeatureMatrix, centroids: &[Vec<f64>], labels: &mut [usize]) {
    for (i, label) in labels.iter_mut().enumerate() {
        let row = data.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = sq_dist(row, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *label = best;
    }
}

/// Moves, for each empty cluster, the point farthest from its own centroid
/// (among clusters with more than one member) into the empty cluster.
fn fill_empty(data: &FeatureMatrix, centroids: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centroids.len();
    let mut sizes = vec![0usize; k];
    for &l in labels.iter() {
        sizes[l] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut far = None;
        let mut far_d = f64::NEG_INFINITY;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = sq_dist(data.row(i), &centroids[l]);
            if d > far_d {
                far_d = d;
                far = Some(i);
            }
        }
        let i = far.expect("k <= rows leaves a cluster with two members");
        sizes[labels[i]] -= 1;
        labels[i] = c;
        sizes[c] = 1;
        centroids[c] = data.row(i).to_vec();
    }
}
