//! Ward agglomerative clustering.
//!
//! Merge costs are increases in total within-cluster sum of squares, kept
//! up to date with the Lance-Williams recurrence. Cluster ids follow the
//! usual dendrogram convention: point `i` is cluster `i`, and the cluster
//! created by the `t`-th merge is `n + t`.

use serde::{Deserialize, Serialize};

use super::{check_k, sq_dist, ClusteringResult, Clusterer};
use crate::error::Result;
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub left: usize,
    pub right: usize,
    /// Increase in within-cluster sum of squares caused by the merge.
    pub cost: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ward;

impl Clusterer for Ward {
    fn name(&self) -> &str {
        "ward"
    }

    fn fit(&self, data: &FeatureMatrix, k: usize) -> Result<ClusteringResult> {
        ward_agglomerative(data, k)
    }
}

pub fn ward_agglomerative(data: &FeatureMatrix, k: usize) -> Result<ClusteringResult> {
    check_k(data, k)?;
    let (merges, slot_of) = ward_merges(data, k);
    // Relabel slots by first appearance in row order.
    let mut relabel = vec![usize::MAX; data.rows()];
    let mut next = 0;
    let labels = slot_of
        .iter()
        .map(|&s| {
            if relabel[s] == usize::MAX {
                relabel[s] = next;
                next += 1;
            }
            relabel[s]
        })
        .collect();
    let mut result = ClusteringResult::from_labels("ward", data, labels, k);
    result.dendrogram = Some(merges);
    Ok(result)
}

/// Merges until `stop_at` clusters remain. Returns the merges in order and,
/// per point, the slot (lowest original index) of its final cluster.
///
/// The cheapest pair is taken at each step; ties go to the pair with the
/// lexicographically smallest slot indices.
pub fn ward_merges(data: &FeatureMatrix, stop_at: usize) -> (Vec<Merge>, Vec<usize>) {
    let n = data.rows();
    let stop_at = stop_at.max(1);
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 0.5 * sq_dist(data.row(i), data.row(j));
            cost[i * n + j] = d;
            cost[j * n + i] = d;
        }
    }
    let mut size = vec![1usize; n];
    let mut id: Vec<usize> = (0..n).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut slot_of: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(stop_at));

    while active.len() > stop_at {
        let (mut bi, mut bj, mut best) = (0, 0, f64::INFINITY);
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let c = cost[i * n + j];
                if c < best {
                    (bi, bj, best) = (i, j, c);
                }
            }
        }
        let (ni, nj) = (size[bi] as f64, size[bj] as f64);
        for &m in &active {
            if m == bi || m == bj {
                continue;
            }
            let nm = size[m] as f64;
            let updated = ((ni + nm) * cost[bi * n + m] + (nj + nm) * cost[bj * n + m] - nm * best)
                / (ni + nj + nm);
            cost[bi * n + m] = updated;
            cost[m * n + bi] = updated;
        }
        if let Some(prev) = merges.last().map(|m: &Merge| m.cost) {
            if best < prev - 1e-12 * (1.0 + prev) {
                log::warn!("ward merge costs decreased: {prev} -> {best}");
            }
        }
        let new_size = size[bi] + size[bj];
        merges.push(Merge {
            left: id[bi].min(id[bj]),
            right: id[bi].max(id[bj]),
            cost: best,
            size: new_size,
        });
        size[bi] = new_size;
        id[bi] = n + merges.len() - 1;
        active.retain(|&m| m != bj);
        for s in slot_of.iter_mut() {
            if *s == bj {
                *s = bi;
            }
        }
    }
    (merges, slot_of)
}
