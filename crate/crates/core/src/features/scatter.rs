use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

/// Ridge added to the within-cluster scatter before inversion.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterStats {
    /// Within-cluster scatter, summed over every point.
    pub p_w: Vec<Vec<f64>>,
    /// Between-cluster scatter, one unweighted term per cluster.
    pub p_b: Vec<Vec<f64>>,
    /// Mean over all points.
    pub m: Vec<f64>,
    /// Per-cluster means, in ascending label order.
    pub m_j: Vec<Vec<f64>>,
    /// `tr((P_W + RIDGE·I)⁻¹ P_B)`.
    pub criterion: f64,
}

pub fn scatter_criterion(data: &FeatureMatrix, labels: &[usize]) -> Result<ScatterStats> {
    let (n, d) = (data.rows(), data.cols());
    if labels.len() != n {
        return Err(Error::arg(format!("{} labels for {n} points", labels.len())));
    }
    if d == 0 || n == 0 {
        return Err(Error::arg("scatter criterion needs a non-empty subset"));
    }
    if data.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("non-finite data"));
    }
    let mut ids = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let k = ids.len();

    let mut m = vec![0.0; d];
    let mut m_j = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    let dense: Vec<usize> = labels.iter().map(|l| ids.binary_search(l).unwrap()).collect();
    for (i, &c) in dense.iter().enumerate() {
        counts[c] += 1;
        for (j, v) in data.row(i).iter().enumerate() {
            m[j] += v;
            m_j[c][j] += v;
        }
    }
    m.iter_mut().for_each(|v| *v /= n as f64);
    for (mean, &c) in m_j.iter_mut().zip(&counts) {
        mean.iter_mut().for_each(|v| *v /= c as f64);
    }

    let mut p_w = DMatrix::<f64>::zeros(d, d);
    for (i, &c) in dense.iter().enumerate() {
        let r: Vec<f64> = data.row(i).iter().zip(&m_j[c]).map(|(x, mu)| x - mu).collect();
        for a in 0..d {
            for b in a..d {
                p_w[(a, b)] += r[a] * r[b];
            }
        }
    }
    let mut p_b = DMatrix::<f64>::zeros(d, d);
    for mean in &m_j {
        let r: Vec<f64> = mean.iter().zip(&m).map(|(x, mu)| x - mu).collect();
        for a in 0..d {
            for b in a..d {
                p_b[(a, b)] += r[a] * r[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            p_w[(a, b)] = p_w[(b, a)];
            p_b[(a, b)] = p_b[(b, a)];
        }
    }

    let regularized = &p_w + DMatrix::identity(d, d) * RIDGE;
    let solved = match regularized.clone().cholesky() {
        Some(ch) => ch.solve(&p_b),
        None => regularized
            .lu()
            .solve(&p_b)
            .ok_or_else(|| Error::Internal("regularized within-cluster scatter is singular".into()))?,
    };
    let criterion = solved.trace();

    let to_rows = |m: &DMatrix<f64>| (0..d).map(|a| (0..d).map(|b| m[(a, b)]).collect()).collect();
    Ok(ScatterStats {
        p_w: to_rows(&p_w),
        p_b: to_rows(&p_b),
        m,
        m_j,
        criterion,
    })
}
