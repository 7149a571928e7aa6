use std::io;

use serde::{Deserialize, Serialize};

use super::{scatter_criterion, EntropyRanking};
use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrapperOptions {
    pub k: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Minimum criterion gain for a feature to be kept.
    pub tolerance: f64,
}

impl WrapperOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            restarts: 10,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    /// Column positions, a prefix of the ranking order.
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    /// Criterion after each accepted addition.
    pub trace_curve: Vec<f64>,
    /// 1-based step at which the search ended: the first non-improving
    /// step, or the number of features if every addition improved.
    pub stopped_at: usize,
    /// Criterion at every evaluated step, including the rejected one.
    pub evaluated: Vec<f64>,
}

impl SubsetSelection {
    /// `step,feature,criterion` CSV of the evaluated steps.
    pub fn write_trace_csv<W: io::Write>(&self, order: &[usize], names: &[String], writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "feature", "criterion", "accepted"])?;
        for (s, &c) in self.evaluated.iter().enumerate() {
            w.write_record([
                (s + 1).to_string(),
                names[order[s]].clone(),
                c.to_string(),
                (s < self.selected.len()).to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Forward search along the entropy ranking. Each candidate prefix is
/// re-clustered with K-means and scored by the invariant criterion; the
/// search stops at the first addition that improves the score by less than
/// `tolerance` and keeps the prefix before it.
pub fn wrapper_select(data: &FeatureMatrix, ranking: &EntropyRanking, opts: &WrapperOptions) -> Result<SubsetSelection> {
    let q = data.cols();
    let mut seen = vec![false; q];
    for &f in &ranking.order {
        if f >= q || std::mem::replace(&mut seen[f], true) {
            return Err(Error::arg("ranking order is not a permutation of the matrix columns"));
        }
    }
    if ranking.order.len() != q {
        return Err(Error::arg("ranking does not cover every column"));
    }

    let mut evaluated: Vec<f64> = Vec::with_capacity(q);
    let mut kept = 0;
    let mut stopped_at = q;
    for step in 1..=q {
        let subset = data.select(&ranking.order[..step])?;
        let clusters = kmeans(&subset, opts.k, opts.seed, opts.restarts)?;
        let score = scatter_criterion(&subset, &clusters.labels)?.criterion;
        log::debug!("wrapper step {step}: criterion {score}");
        let improved = evaluated.last().is_none_or(|&prev| score - prev >= opts.tolerance);
        evaluated.push(score);
        if !improved {
            stopped_at = step;
            break;
        }
        kept = step;
    }
    let selected = ranking.order[..kept].to_vec();
    Ok(SubsetSelection {
        names: selected.iter().map(|&p| data.names()[p].clone()).collect(),
        trace_curve: evaluated[..kept].to_vec(),
        selected,
        stopped_at,
        evaluated,
    })
}
