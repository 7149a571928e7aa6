use serde::{Deserialize, Serialize};

use super::sq_dist;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_point: Vec<f64>,
    pub mean: f64,
}

/// Silhouette coefficient with plain Euclidean distances. Points in
/// singleton clusters score 0. Labels need not be contiguous.
pub fn silhouette(data: &FeatureMatrix, labels: &[usize]) -> Result<SilhouetteReport> {
    let n = data.rows();
    if labels.len() != n {
        return Err(Error::arg(format!("{} labels for {n} points", labels.len())));
    }
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::arg("silhouette needs at least two clusters"));
    }
    let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    let k = ids.len();
    let mut sizes = vec![0usize; k];
    dense.iter().for_each(|&c| sizes[c] += 1);

    let per_point: Vec<f64> = (0..n)
        .map(|i| {
            let own = dense[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[dense[j]] += sq_dist(data.row(i), data.row(j)).sqrt();
                }
            }
            let within = sums[own] / (sizes[own] - 1) as f64;
            let nearest = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let scale = within.max(nearest);
            if scale > 0.0 {
                (nearest - within) / scale
            } else {
                0.0
            }
        })
        .collect();
    let mean = per_point.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport { per_point, mean })
}
