//! Long simulations agree with the exact stationary-chain cost.

use apptsched::fluid::{BenchmarkPolicy, Provenance};
use apptsched::mdp::{average_cost, value_iteration, MdpConfig};
use apptsched::sim::{run_policy, BookingPolicy, EarliestSlot, QuotaPolicy, SimConfig, TabularPolicy};

fn check(policy: &dyn BookingPolicy, config: &MdpConfig) {
    let exact = average_cost(config, |s| policy.decide(s, config)).unwrap();
    let sim = SimConfig {
        mdp: config.clone(),
        policy: BenchmarkPolicy::zeros(config.classes, config.horizon),
        days: 4014,
        replications: 24,
        seed: 77,
        warmup: 14,
    };
    let r = run_policy(&sim, policy, None).unwrap();
    let costs: Vec<f64> = r.per_replication.iter().map(|x| x.mean_daily_cost).collect();
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let se = (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    assert!((mean - exact).abs() < 4.0 * se + 1e-12, "{}: simulated {mean} +- {se}, exact {exact}", policy.name());
}

#[test]
fn toy_policies() {
    let config = MdpConfig::toy_instance();
    check(&EarliestSlot, &config);
    let quotas = BenchmarkPolicy { quotas: vec![vec![1, 0], vec![1, 0]], provenance: Provenance::Manual };
    check(&QuotaPolicy::new("q", quotas), &config);
    check(&TabularPolicy::new(value_iteration(&config, 1e-9).unwrap()), &config);
}

#[test]
fn three_day_horizon() {
    let config = MdpConfig {
        classes: 2,
        horizon: 3,
        capacity: 2,
        d_max: vec![2, 2],
        arrival_rates: vec![0.8, 1.1],
        late_costs: vec![vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 3.0]],
        reject_costs: vec![5.0, 10.0],
        discount: 0.95,
        seed: 0,
    };
    let quotas = BenchmarkPolicy { quotas: vec![vec![0, 1, 1], vec![1, 0, 0]], provenance: Provenance::Manual };
    check(&QuotaPolicy::new("q", quotas), &config);
    check(&EarliestSlot, &config);
}
