use std::io;

use serde::{Deserialize, Serialize};

use super::kmeans;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElbowPoint {
    pub k: usize,
    pub wcss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    pub points: Vec<ElbowPoint>,
    pub knee: usize,
    /// False if some k still had a larger WCSS than k-1 after re-runs.
    pub monotone: bool,
}

impl ElbowCurve {
    /// Two-column `k,wcss` CSV.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "wcss"])?;
        for p in &self.points {
            w.write_record([p.k.to_string(), p.wcss.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

const RERUNS: usize = 2;

/// K-means WCSS for k = 1..=k_max and the knee of that curve.
///
/// A k whose WCSS exceeds the previous one is re-run with four times the
/// restarts (and a shifted seed), up to twice; if it is still out of order
/// the curve is flagged non-monotone.
pub fn elbow_scan(data: &FeatureMatrix, k_max: usize, seed: u64, restarts: usize) -> Result<ElbowCurve> {
    if k_max == 0 || k_max > data.rows() {
        return Err(Error::arg(format!(
            "k_max must be in 1..={}, got {k_max}",
            data.rows()
        )));
    }
    let mut points: Vec<ElbowPoint> = Vec::with_capacity(k_max);
    let mut monotone = true;
    for k in 1..=k_max {
        let mut wcss = kmeans(data, k, seed, restarts)?.wcss;
        if let Some(prev) = points.last().map(|p| p.wcss) {
            let mut attempt = 0;
            let mut r = restarts.max(1);
            while wcss > prev && attempt < RERUNS {
                attempt += 1;
                r *= 4;
                wcss = wcss.min(kmeans(data, k, seed.wrapping_add(attempt as u64), r)?.wcss);
            }
            if wcss > prev {
                log::warn!("elbow curve not monotone at k={k}: {wcss} > {prev}");
                monotone = false;
            }
        }
        points.push(ElbowPoint { k, wcss });
    }
    let knee = knee_by_chord(&points);
    Ok(ElbowCurve {
        points,
        knee,
        monotone,
    })
}

/// Smallest k whose point lies farthest from the chord joining the first
/// and last points of the curve.
pub fn knee_by_chord(points: &[ElbowPoint]) -> usize {
    let (Some(first), Some(last)) = (points.first(), points.last()) else {
        return 0;
    };
    let dx = last.k as f64 - first.k as f64;
    let dy = last.wcss - first.wcss;
    let norm = (dx * dx + dy * dy).sqrt();
    if norm == 0.0 {
        return first.k;
    }
    let mut best = first.k;
    let mut best_d = f64::NEG_INFINITY;
    for p in points {
        let d = (dy * (p.k as f64 - first.k as f64) - dx * (p.wcss - first.wcss)).abs() / norm;
        if d > best_d {
            best_d = d;
            best = p.k;
        }
    }
    best
}
