//! Monte-Carlo evaluation of booking policies on a rolling calendar.

mod policies;

use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use policies::{BookingPolicy, EarliestSlot, PolicyRegistry, QuotaPolicy, RejectAll, TabularPolicy};

use crate::error::{Error, Result};
use crate::fluid::BenchmarkPolicy;
use crate::mdp::{sample_arrivals, stage_cost, transition, MdpConfig, MdpState};

fn default_warmup() -> usize {
    14
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub mdp: MdpConfig,
    pub policy: BenchmarkPolicy,
    /// Simulated days per replication, warmup included.
    pub days: usize,
    pub replications: usize,
    pub seed: u64,
    /// Leading days left out of every metric.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.policy.check_dims(&self.mdp)?;
        self.validate_run()
    }

    /// Model and run-length checks, without the quota table.
    pub fn validate_run(&self) -> Result<()> {
        self.mdp.validate()?;
        if self.days <= self.warmup {
            return Err(Error::arg(format!(
                "days ({}) must exceed warmup ({})",
                self.days, self.warmup
            )));
        }
        if self.replications == 0 {
            return Err(Error::arg("replications must be at least 1"));
        }
        Ok(())
    }

    fn measured_days(&self) -> usize {
        self.days - self.warmup
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// 1-based class number.
    pub class: usize,
    pub arrivals: u64,
    pub booked: u64,
    pub rejected: u64,
    /// `wait_histogram[h]`: patients booked `h + 1` days ahead.
    pub wait_histogram: Vec<u64>,
    /// Indirect wait in days; `None` when nobody was booked.
    pub mean_wait: Option<f64>,
    pub p50_wait: Option<u32>,
    pub p90_wait: Option<u32>,
    /// Lateness plus rejection cost.
    pub cost: f64,
}

impl ClassMetrics {
    fn new(class: usize, horizon: usize) -> Self {
        Self {
            class,
            arrivals: 0,
            booked: 0,
            rejected: 0,
            wait_histogram: vec![0; horizon],
            mean_wait: None,
            p50_wait: None,
            p90_wait: None,
            cost: 0.0,
        }
    }

    fn absorb(&mut self, other: &ClassMetrics) {
        self.arrivals += other.arrivals;
        self.booked += other.booked;
        self.rejected += other.rejected;
        self.cost += other.cost;
        for (a, b) in self.wait_histogram.iter_mut().zip(&other.wait_histogram) {
            *a += b;
        }
    }

    fn summarize(&mut self) {
        let n: u64 = self.wait_histogram.iter().sum();
        if n == 0 {
            return;
        }
        let total: u64 = self.wait_histogram.iter().enumerate().map(|(h, c)| (h as u64 + 1) * c).sum();
        self.mean_wait = Some(total as f64 / n as f64);
        let quantile = |q: f64| {
            let target = (q * n as f64).ceil().max(1.0) as u64;
            let mut acc = 0;
            for (h, c) in self.wait_histogram.iter().enumerate() {
                acc += c;
                if acc >= target {
                    return h as u32 + 1;
                }
            }
            self.wait_histogram.len() as u32
        };
        self.p50_wait = Some(quantile(0.5));
        self.p90_wait = Some(quantile(0.9));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: usize,
    /// ChaCha8 stream used for this replication's arrivals.
    pub stream: u64,
    pub per_class: Vec<ClassMetrics>,
    pub slots_used: u64,
    pub total_cost: f64,
    pub mean_daily_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub policy: String,
    pub seed: u64,
    pub days: usize,
    pub warmup: usize,
    pub replications: usize,
    pub per_class: Vec<ClassMetrics>,
    /// Share of post-warmup service-day capacity that was booked.
    pub utilization: f64,
    pub total_cost: f64,
    pub mean_daily_cost: f64,
    pub per_replication: Vec<ReplicationSummary>,
}

/// One row per (replication, day, class) of the audit trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub replication: usize,
    pub day: usize,
    pub class: usize,
    pub arrivals: u32,
    pub booked: Vec<u32>,
    pub rejected: u32,
}

pub fn write_trace_csv<W: io::Write>(rows: &[TraceRow], horizon: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = ["replication", "day", "class", "arrivals"].map(String::from).to_vec();
    header.extend((1..=horizon).map(|h| format!("booked_day_{h}")));
    header.push("rejected".into());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.replication.to_string(), r.day.to_string(), r.class.to_string(), r.arrivals.to_string()];
        rec.extend(r.booked.iter().map(u32::to_string));
        rec.push(r.rejected.to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Simulates the quota policy in `config`.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationReport> {
    config.validate()?;
    let policy = QuotaPolicy::new("benchmark", config.policy.clone());
    run_policy(config, &policy, None)
}

/// Simulates any policy. Replication `r` draws arrivals from stream `r` of
/// a ChaCha8 generator seeded with `config.seed`, so every policy sees the
/// same demand. When `trace` is given, every simulated day is recorded.
pub fn run_policy(
    config: &SimConfig,
    policy: &dyn BookingPolicy,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<SimulationReport> {
    config.validate_run()?;
    let want_trace = trace.is_some();
    let results: Vec<(ReplicationSummary, Vec<TraceRow>)> = (0..config.replications)
        .into_par_iter()
        .map(|r| replicate(config, policy, r, want_trace))
        .collect::<Result<_>>()?;

    let mdp = &config.mdp;
    let mut per_class: Vec<ClassMetrics> = (0..mdp.classes).map(|i| ClassMetrics::new(i + 1, mdp.horizon)).collect();
    let mut slots_used = 0u64;
    let mut total_cost = 0.0;
    let mut per_replication = Vec::with_capacity(results.len());
    let mut rows = Vec::new();
    for (summary, tr) in results {
        for (agg, c) in per_class.iter_mut().zip(&summary.per_class) {
            agg.absorb(c);
        }
        slots_used += summary.slots_used;
        total_cost += summary.total_cost;
        per_replication.push(summary);
        rows.extend(tr);
    }
    per_class.iter_mut().for_each(ClassMetrics::summarize);
    if let Some(out) = trace {
        *out = rows;
    }
    let measured = (config.measured_days() * config.replications) as f64;
    let capacity = measured * f64::from(mdp.capacity);
    Ok(SimulationReport {
        policy: policy.name().to_string(),
        seed: config.seed,
        days: config.days,
        warmup: config.warmup,
        replications: config.replications,
        per_class,
        utilization: if capacity > 0.0 { slots_used as f64 / capacity } else { 0.0 },
        total_cost,
        mean_daily_cost: total_cost / measured,
        per_replication,
    })
}

fn replicate(
    config: &SimConfig,
    policy: &dyn BookingPolicy,
    r: usize,
    want_trace: bool,
) -> Result<(ReplicationSummary, Vec<TraceRow>)> {
    let mdp = &config.mdp;
    let (ic, h) = (mdp.classes, mdp.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(r as u64);
    let mut per_class: Vec<ClassMetrics> = (0..ic).map(|i| ClassMetrics::new(i + 1, h)).collect();
    let mut all_arrivals = vec![0u64; ic];
    let mut all_booked = vec![0u64; ic];
    let mut all_rejected = vec![0u64; ic];
    // Bookings per service day, kept apart from the state's free-slot counts.
    // Index `d % (h + 1)` holds service day `d`.
    let mut ledger = vec![0u32; h + 1];
    let mut slots_used = 0u64;
    let mut total_cost = 0.0;
    let mut rows = Vec::new();
    let mut state = MdpState::initial(mdp);

    for day in 0..config.days {
        state.x = sample_arrivals(mdp, &mut rng);
        let action = policy.decide(&state, mdp);
        action
            .check_feasible(&state)
            .map_err(|e| Error::Internal(format!("policy {} proposed an infeasible action: {e}", policy.name())))?;
        // Service day `day + 1` is final once today's day-1 bookings are made.
        ledger[(day + h + 1) % (h + 1)] = 0;
        for off in 0..h {
            let slot = &mut ledger[(day + off + 1) % (h + 1)];
            *slot += action.col_sum(off);
            if *slot > mdp.capacity {
                return Err(Error::Internal(format!(
                    "day {} overbooked: {} > {}",
                    day + off + 1,
                    slot,
                    mdp.capacity
                )));
            }
        }
        let measured = day >= config.warmup;
        for i in 0..ic {
            let booked = action.row_sum(i);
            let rejected = state.x[i] - booked;
            all_arrivals[i] += u64::from(state.x[i]);
            all_booked[i] += u64::from(booked);
            all_rejected[i] += u64::from(rejected);
            if measured {
                let m = &mut per_class[i];
                m.arrivals += u64::from(state.x[i]);
                m.booked += u64::from(booked);
                m.rejected += u64::from(rejected);
                for off in 0..h {
                    let n = action.get(i, off);
                    m.wait_histogram[off] += u64::from(n);
                    m.cost += mdp.late_costs[i][off] * f64::from(n);
                }
                m.cost += mdp.reject_costs[i] * f64::from(rejected);
            }
            if want_trace {
                rows.push(TraceRow {
                    replication: r,
                    day,
                    class: i + 1,
                    arrivals: state.x[i],
                    booked: (0..h).map(|off| action.get(i, off)).collect(),
                    rejected,
                });
            }
        }
        if measured {
            total_cost += stage_cost(&state, &action, mdp)?;
            slots_used += u64::from(ledger[(day + 1) % (h + 1)]);
        }
        let zeros = vec![0; ic];
        state = transition(&state, &action, &zeros, mdp)?;
    }
    for i in 0..ic {
        if all_arrivals[i] != all_booked[i] + all_rejected[i] {
            return Err(Error::Internal(format!("flow imbalance for class {}", i + 1)));
        }
    }
    let class_cost: f64 = per_class.iter().map(|c| c.cost).sum();
    if (class_cost - total_cost).abs() > 1e-9 * (1.0 + total_cost.abs()) {
        return Err(Error::Internal("per-class costs do not add up to the total".into()));
    }
    per_class.iter_mut().for_each(ClassMetrics::summarize);
    Ok((
        ReplicationSummary {
            replication: r,
            stream: r as u64,
            per_class,
            slots_used,
            total_cost,
            mean_daily_cost: total_cost / config.measured_days() as f64,
        },
        rows,
    ))
}

/// Paired difference in mean daily cost, `policy` minus `baseline`, over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub baseline: String,
    pub policy: String,
    pub mean: f64,
    /// Standard error of the mean; zero with one replication.
    pub std_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyComparison {
    pub reports: Vec<SimulationReport>,
    pub differences: Vec<PairedDifference>,
}

/// Runs every policy on the same arrival streams and compares each with the
/// first.
pub fn compare_policies(config: &SimConfig, policies: &[&dyn BookingPolicy]) -> Result<PolicyComparison> {
    if policies.len() < 2 {
        return Err(Error::arg("comparison needs at least two policies"));
    }
    let reports: Vec<SimulationReport> = policies
        .iter()
        .map(|p| run_policy(config, *p, None))
        .collect::<Result<_>>()?;
    let base = &reports[0];
    let n = config.replications;
    let differences = reports[1..]
        .iter()
        .map(|rep| {
            let diffs: Vec<f64> = rep
                .per_replication
                .iter()
                .zip(&base.per_replication)
                .map(|(a, b)| a.mean_daily_cost - b.mean_daily_cost)
                .collect();
            let mean = diffs.iter().sum::<f64>() / n as f64;
            let (std_error, half) = if n > 1 {
                let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let se = (var / n as f64).sqrt();
                let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                    .map_err(|e| Error::Internal(e.to_string()))?
                    .inverse_cdf(0.975);
                (se, t * se)
            } else {
                (0.0, 0.0)
            };
            Ok(PairedDifference {
                baseline: base.policy.clone(),
                policy: rep.policy.clone(),
                mean,
                std_error,
                ci95_low: mean - half,
                ci95_high: mean + half,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PolicyComparison { reports, differences })
}
