use rand::Rng;
use rand_distr::{Distribution, Poisson};

use super::MdpConfig;

/// Poisson(`lambda`) probabilities for `0..=d`, with the upper tail lumped
/// into the last entry so the vector sums to one.
pub fn truncated_poisson_pmf(lambda: f64, d: u32) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(d as usize + 1);
    if lambda <= 0.0 {
        pmf.resize(d as usize + 1, 0.0);
        pmf[0] = 1.0;
        return pmf;
    }
    // Log-space terms avoid overflow of λ^k / k! for large rates.
    let mut log_p = -lambda;
    let mut below = 0.0;
    for k in 0..d {
        if k > 0 {
            log_p += lambda.ln() - f64::from(k).ln();
        }
        let p = log_p.exp();
        pmf.push(p);
        below += p;
    }
    pmf.push((1.0 - below).max(0.0));
    pmf
}

/// One day's requests per class: Poisson draws capped at `d_max`.
pub fn sample_arrivals<R: Rng + ?Sized>(config: &MdpConfig, rng: &mut R) -> Vec<u32> {
    config
        .arrival_rates
        .iter()
        .zip(&config.d_max)
        .map(|(&lambda, &d)| {
            if lambda <= 0.0 {
                return 0;
            }
            let draw: f64 = Poisson::new(lambda).expect("positive finite rate").sample(rng);
            (draw as u64).min(u64::from(d)) as u32
        })
        .collect()
}
