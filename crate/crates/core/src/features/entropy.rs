use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::sq_dist;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntropy {
    /// Column position in the ranked matrix.
    pub feature: usize,
    pub name: String,
    /// Entropy of the data with this feature removed.
    pub e_without: f64,
    /// `e_without - e_all`: how much removing the feature disorders the data.
    pub importance: f64,
    /// Set when every point coincides once the feature is removed.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRanking {
    pub e_all: f64,
    pub per_feature: Vec<FeatureEntropy>,
    /// Column positions by importance, most important first.
    pub order: Vec<usize>,
}

/// Similarity entropy over all ordered pairs `i != j`, using the columns
/// not listed in `skip`.
///
/// Similarities are `S = exp(-alpha * dist)` with `alpha = ln 2 / mean_dist`,
/// so a pair at the mean distance has similarity one half. Returns `None`
/// when the mean distance is zero.
pub fn similarity_entropy(data: &FeatureMatrix, skip: Option<usize>) -> Option<f64> {
    let n = data.rows();
    let keep: Vec<usize> = (0..data.cols()).filter(|&j| Some(j) != skip).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| keep.iter().map(|&j| data.get(i, j)).collect())
        .collect();
    let mut dists = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            dists.push(sq_dist(&rows[i], &rows[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return None;
    }
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    if mean <= 0.0 {
        return None;
    }
    let alpha = std::f64::consts::LN_2 / mean;
    let unordered: f64 = dists
        .iter()
        .map(|&d| {
            let s = (-alpha * d).exp();
            -(xlnx(s) + xlnx(1.0 - s))
        })
        .sum();
    Some(2.0 * unordered)
}

/// `x ln x` with the convention `0 ln 0 = 0`.
fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Ranks every column by the entropy change its removal causes.
pub fn entropy_rank(data: &FeatureMatrix) -> Result<EntropyRanking> {
    if data.rows() < 2 || data.cols() < 2 {
        return Err(Error::arg(format!(
            "entropy ranking needs at least 2 rows and 2 features, got {}x{}",
            data.rows(),
            data.cols()
        )));
    }
    let e_all = similarity_entropy(data, None).unwrap_or(0.0);
    let per_feature: Vec<FeatureEntropy> = (0..data.cols())
        .into_par_iter()
        .map(|t| {
            let (e_without, degenerate) = match similarity_entropy(data, Some(t)) {
                Some(e) => (e, false),
                None => (0.0, true),
            };
            FeatureEntropy {
                feature: t,
                name: data.names()[t].clone(),
                e_without,
                importance: e_without - e_all,
                degenerate,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..data.cols()).collect();
    order.sort_by(|&a, &b| {
        per_feature[b]
            .importance
            .total_cmp(&per_feature[a].importance)
            .then(a.cmp(&b))
    });
    Ok(EntropyRanking {
        e_all,
        per_feature,
        order,
    })
}
