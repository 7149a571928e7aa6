//! K-means and Ward agglomerative clustering, silhouette evaluation and
//! elbow-based choice of K.
//!
//! Both algorithms implement [`Clusterer`] and are looked up by name through
//! [`ClustererRegistry`], so the pipeline and CLI can switch methods from
//! configuration.

mod elbow;
mod kmeans;
mod silhouette;
mod ward;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

pub use elbow::{elbow_scan, knee_by_chord, ElbowCurve, ElbowPoint};
pub use kmeans::{kmeans, lloyd, KMeans, LloydRun, MAX_ITER, MOVE_TOL};
pub use silhouette::{silhouette, SilhouetteReport};
pub use ward::{ward_agglomerative, ward_merges, Merge, Ward};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub method: String,
    pub k: usize,
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared Euclidean distances to the centroids.
    pub wcss: f64,
    /// Merge sequence, for hierarchical methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dendrogram: Option<Vec<Merge>>,
}

impl ClusteringResult {
    /// Builds a result from labels, computing centroids as cluster means.
    pub fn from_labels(method: &str, data: &FeatureMatrix, labels: Vec<usize>, k: usize) -> Self {
        let centroids = cluster_means(data, &labels, k);
        let wcss = wcss(data, &labels, &centroids);
        Self {
            method: method.to_string(),
            k,
            labels,
            centroids,
            wcss,
            dendrogram: None,
        }
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Checks label range, non-empty clusters and the stored objective.
    pub fn validate(&self, data: &FeatureMatrix) -> Result<()> {
        if self.labels.len() != data.rows() {
            return Err(Error::Internal("label count differs from row count".into()));
        }
        if self.labels.iter().any(|&l| l >= self.k) {
            return Err(Error::Internal("label out of range".into()));
        }
        if self.cluster_sizes().contains(&0) {
            return Err(Error::Internal("empty cluster".into()));
        }
        let recomputed = wcss(data, &self.labels, &cluster_means(data, &self.labels, self.k));
        if (recomputed - self.wcss).abs() > 1e-9 * (1.0 + recomputed) {
            return Err(Error::Internal(format!(
                "stored wcss {} differs from recomputed {recomputed}",
                self.wcss
            )));
        }
        Ok(())
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster means; an empty cluster gets a zero vector.
pub fn cluster_means(data: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = data.cols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(data.row(i)) {
            *s += v;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|v| *v /= c as f64);
        }
    }
    sums
}

pub fn wcss(data: &FeatureMatrix, labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(data.row(i), &centroids[l]))
        .sum()
}

pub(crate) fn check_k(data: &FeatureMatrix, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::arg("cluster count must be positive"));
    }
    if k > data.rows() {
        return Err(Error::arg(format!(
            "cluster count {k} exceeds number of points {}",
            data.rows()
        )));
    }
    Ok(())
}

/// A clustering algorithm producing exactly `k` non-empty clusters.
pub trait Clusterer: Send + Sync {
    fn name(&self) -> &str;

    fn fit(&self, data: &FeatureMatrix, k: usize) -> Result<ClusteringResult>;
}

/// Parameters handed to registry factories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 10,
        }
    }
}

type Factory = Box<dyn Fn(&ClusterParams) -> Box<dyn Clusterer> + Send + Sync>;

/// Name -> constructor table for clustering methods.
pub struct ClustererRegistry {
    factories: BTreeMap<String, Factory>,
}

impl ClustererRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&ClusterParams) -> Box<dyn Clusterer> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(&self, name: &str, params: &ClusterParams) -> Result<Box<dyn Clusterer>> {
        self.factories
            .get(name)
            .map(|f| f(params))
            .ok_or_else(|| {
                Error::arg(format!(
                    "unknown clustering method `{name}` (available: {})",
                    self.names().join(", ")
                ))
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

impl Default for ClustererRegistry {
    /// Registers `kmeans` and `ward`.
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("kmeans", |p| Box::new(KMeans::new(p.seed, p.restarts)));
        r.register("ward", |_| Box::new(Ward));
        r
    }
}
