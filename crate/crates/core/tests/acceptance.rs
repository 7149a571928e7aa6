//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use apptsched::clustering::{elbow_scan, kmeans, silhouette, ward_agglomerative, ward_merges};
use apptsched::features::{entropy_rank, scatter_criterion, wrapper_select, WrapperOptions};
use apptsched::fluid::{extract_policy, solve_fluid, BenchmarkPolicy, FluidProblem, DEFAULT_T_STEPS};
use apptsched::ingest::{encode_normalize, load_dataset, FeatureMatrix, FeatureSchema};
use apptsched::lp::LpStatus;
use apptsched::mdp::{average_cost, relative_value_iteration, value_iteration, MdpConfig};
use apptsched::sim::{run_policy, run_simulation, QuotaPolicy, SimConfig, TraceRow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dataset_path() -> PathBuf {
    env::var_os("APPTSCHED_DATASET")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/cad_patients.csv"))
}

fn load_normalized() -> Result<FeatureMatrix, String> {
    let path = dataset_path();
    if !path.exists() {
        return Err(format!(
            "dataset not found at {} (set APPTSCHED_DATASET to the 303-patient CSV)",
            path.display()
        ));
    }
    let records = load_dataset(&path, &FeatureSchema::intake()).map_err(|e| e.to_string())?;
    encode_normalize(&records, &FeatureSchema::intake()).map_err(|e| e.to_string())
}

/// Exhaustive minimum of the within-cluster sum of squares over labelings
/// that use every one of `k` labels.
fn partition_min(points: &[[f64; 2]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sum = vec![[0.0; 2]; k];
        let mut sq = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            cnt[l] += 1;
            for d in 0..2 {
                sum[l][d] += p[d];
                sq[l] += p[d] * p[d];
            }
        }
        if cnt.iter().all(|&c| c > 0) {
            let w: f64 = (0..k)
                .map(|c| sq[c] - (sum[c][0].powi(2) + sum[c][1].powi(2)) / cnt[c] as f64)
                .sum();
            best = best.min(w);
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2015);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.random_range(4..=10);
        let k = rng.random_range(2..=3);
        let points: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let data = FeatureMatrix::from_rows(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap();
        let got = kmeans(&data, k, case, 32).map_err(|e| e.to_string())?.wcss;
        let opt = partition_min(&points, k);
        let rel = (got - opt).abs() / opt.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        check(rel < 1e-9, format!("case {case} (n={n}, k={k}): wcss {got} vs optimum {opt}"))?;
    }
    Ok(format!("50 instances, worst relative error {worst:.1e}"))
}

/// Merge sequence by direct search: at each step merge the pair of current
/// clusters whose union raises the total sum of squares least.
fn brute_ward(points: &[f64]) -> Vec<(Vec<usize>, f64)> {
    let sse = |m: &[usize]| {
        let mean = m.iter().map(|&i| points[i]).sum::<f64>() / m.len() as f64;
        m.iter().map(|&i| (points[i] - mean).powi(2)).sum::<f64>()
    };
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (0, 0, f64::INFINITY);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut u = clusters[a].clone();
                u.extend(&clusters[b]);
                let inc = sse(&u) - sse(&clusters[a]) - sse(&clusters[b]);
                if inc < best.2 {
                    best = (a, b, inc);
                }
            }
        }
        let (a, b, inc) = best;
        let taken = clusters.remove(b);
        clusters[a].extend(taken);
        clusters[a].sort_unstable();
        out.push((clusters[a].clone(), inc));
    }
    out
}

fn criterion_2() -> Outcome {
    let cases: [&[f64]; 20] = [
        &[0.0, 1.0, 5.0, 6.5],
        &[0.0, 0.3, 1.0, 4.1, 4.2, 9.0],
        &[2.0, -1.0, 7.3, 7.0, 3.1],
        &[0.0, 10.0, 10.7, 25.0],
        &[1.0, 2.2, 3.5, 4.9, 6.4, 8.0],
        &[-3.0, -2.1, 0.0, 0.8, 5.5],
        &[0.0, 0.1],
        &[4.0, 1.0, 9.0],
        &[0.0, 2.0, 2.9, 8.0, 8.4, 8.5],
        &[100.0, 101.5, 250.0, 251.2, 400.0],
        &[0.5, 1.7, 3.0, 3.3, 6.1],
        &[-5.0, 0.0, 5.2, 10.5, 16.0, 21.7],
        &[1.0, 1.05, 1.2, 3.0, 3.4, 3.45],
        &[0.0, 3.0, 3.5, 3.7, 20.0],
        &[7.0, 2.5, 2.6, 9.9, 0.0],
        &[0.0, 1.1, 2.3, 3.6, 5.0, 6.5],
        &[12.0, 0.0, 6.2],
        &[0.0, 0.9, 1.7, 12.0, 12.6, 13.1],
        &[-1.5, 4.4, 4.6, 4.75, 30.0, 31.0],
        &[2.0, 8.0, 8.3, 15.0, 15.9, 16.1],
    ];
    for (c, pts) in cases.iter().enumerate() {
        let data = FeatureMatrix::from_rows(&pts.iter().map(|&p| vec![p]).collect::<Vec<_>>()).unwrap();
        let (merges, _) = ward_merges(&data, 1);
        let n = pts.len();
        // Members of every cluster id, to compare by point sets.
        let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let expected = brute_ward(pts);
        check(merges.len() == expected.len(), format!("case {c}: merge count"))?;
        for (t, (m, (set, inc))) in merges.iter().zip(&expected).enumerate() {
            let mut u = members[m.left].clone();
            u.extend(&members[m.right]);
            u.sort_unstable();
            check(&u == set, format!("case {c}, merge {t}: {u:?} vs {set:?}"))?;
            check((m.cost - inc).abs() <= 1e-9 * (1.0 + inc), format!("case {c}, merge {t}: cost {} vs {inc}", m.cost))?;
            members.push(u);
        }
        let r = ward_agglomerative(&data, 2).map_err(|e| e.to_string())?;
        r.validate(&data).map_err(|e| e.to_string())?;
    }
    Ok("20 instances, merge sequences and costs identical".into())
}

fn criterion_3() -> Outcome {
    let data = load_normalized()?;
    let ranking = entropy_rank(&data).map_err(|e| e.to_string())?;
    let subset = wrapper_select(&data, &ranking, &WrapperOptions::new(2, 0)).map_err(|e| e.to_string())?;
    let selected = data.select(&subset.selected).map_err(|e| e.to_string())?;
    let km = kmeans(&selected, 2, 0, 10).map_err(|e| e.to_string())?;
    let wd = ward_agglomerative(&selected, 2).map_err(|e| e.to_string())?;
    let s_km = silhouette(&selected, &km.labels).map_err(|e| e.to_string())?.mean;
    let s_wd = silhouette(&selected, &wd.labels).map_err(|e| e.to_string())?.mean;
    check(s_km > s_wd, format!("k-means silhouette {s_km:.3} not above Ward {s_wd:.3}"))?;
    let in_band = (s_km - 0.87).abs() <= 0.10 && (s_wd - 0.81).abs() <= 0.10;
    Ok(format!(
        "k-means {s_km:.3} > Ward {s_wd:.3} on {} features ({})",
        subset.selected.len(),
        if in_band { "within the +-0.10 band" } else { "outside the +-0.10 band; ordering gates" }
    ))
}

fn criterion_4() -> Outcome {
    let data = load_normalized()?;
    let curve = elbow_scan(&data, 10, 0, 10).map_err(|e| e.to_string())?;
    let monotone = curve.points.windows(2).all(|w| w[1].wcss <= w[0].wcss);
    check(monotone, "WCSS curve increases somewhere on k = 1..10")?;
    check(curve.knee == 2, format!("knee at k = {}", curve.knee))?;
    Ok("WCSS non-increasing, knee at k = 2".into())
}

/// Two informative columns that split the rows into two groups and two
/// noise columns crossed with them in a full factorial.
fn factorial_data() -> FeatureMatrix {
    let mut rows = Vec::new();
    for group in [0.0, 1.0] {
        for a in [0.0, 0.2] {
            for b in [0.0, 0.2] {
                for n1 in 0..4 {
                    for n2 in 0..4 {
                        rows.push(vec![group + a, group + b, n1 as f64 / 3.0, n2 as f64 / 3.0]);
                    }
                }
            }
        }
    }
    FeatureMatrix::from_rows(&rows)
        .unwrap()
        .with_names(["inf_a", "inf_b", "noise_a", "noise_b"].map(String::from).to_vec())
        .normalized()
}

fn criterion_5() -> Outcome {
    let data = factorial_data();
    let opts = WrapperOptions::new(2, 3);
    let score = |cols: &[usize]| -> Result<f64, String> {
        let sub = data.select(cols).map_err(|e| e.to_string())?;
        let labels = kmeans(&sub, 2, opts.seed, opts.restarts).map_err(|e| e.to_string())?.labels;
        Ok(scatter_criterion(&sub, &labels).map_err(|e| e.to_string())?.criterion)
    };
    let one = score(&[0])?;
    let both = score(&[0, 1])?;
    check(both > one, format!("adding the second informative column: {one} -> {both}"))?;
    for noisy in [vec![0, 1, 2], vec![0, 1, 3], vec![0, 1, 2, 3], vec![0, 2]] {
        let base: Vec<usize> = noisy.iter().copied().filter(|&c| c < 2).collect();
        let delta = (score(&noisy)? - score(&base)?).abs();
        check(delta < 1e-6, format!("adding noise to {base:?} changed the criterion by {delta:.3e}"))?;
    }
    // Exhaustive search: smallest subset within 1e-6 of the best score.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mask in 1u32..16 {
        let cols: Vec<usize> = (0..4).filter(|c| mask & (1 << c) != 0).collect();
        let s = score(&cols)?;
        best = match best {
            Some((b, bc)) if s < b + 1e-6 && !(s > b - 1e-6 && cols.len() < bc.len()) => Some((b.max(s), bc)),
            _ => Some((s, cols)),
        };
    }
    let (_, exhaustive) = best.unwrap();
    let ranking = entropy_rank(&data).map_err(|e| e.to_string())?;
    let mut picked = wrapper_select(&data, &ranking, &opts).map_err(|e| e.to_string())?.selected;
    picked.sort_unstable();
    check(exhaustive == vec![0, 1], format!("exhaustive search picked {exhaustive:?}"))?;
    check(picked == exhaustive, format!("wrapper picked {picked:?} (entropy order {:?})", ranking.order))?;
    Ok(format!("criterion {one:.4} -> {both:.4}; noise changes < 1e-6; wrapper and exhaustive both pick [0, 1]"))
}

fn criterion_6() -> Outcome {
    let config = MdpConfig::toy_instance();
    let problem = FluidProblem::from_config(&config, DEFAULT_T_STEPS).map_err(|e| e.to_string())?;
    let policy = extract_policy(&solve_fluid(&problem).map_err(|e| e.to_string())?, &problem).map_err(|e| e.to_string())?;
    let sim = SimConfig {
        mdp: config.clone(),
        policy: policy.clone(),
        days: 100_000 + 14,
        replications: 1,
        seed: 6,
        warmup: 14,
    };
    let fluid_cost = run_simulation(&sim).map_err(|e| e.to_string())?.mean_daily_cost;
    let table = value_iteration(&config, 1e-10).map_err(|e| e.to_string())?;
    let exact = average_cost(&config, |s| table.action(s).cloned().unwrap()).map_err(|e| e.to_string())?;
    let gain = relative_value_iteration(&config, 1e-10).map_err(|e| e.to_string())?.gain.unwrap();
    let gap = (fluid_cost - exact) / exact;
    let detail = format!(
        "fluid quotas {:?}: simulated {fluid_cost:.4}/day; value-iteration policy {exact:.4}/day \
         (average-cost optimum {gain:.4}); gap {:.1}%",
        policy.quotas,
        100.0 * gap
    );
    check(gap.abs() <= 0.15, detail.clone())?;
    Ok(detail)
}

fn criterion_7() -> Outcome {
    let problem = FluidProblem::from_config(&MdpConfig::reference_instance(), DEFAULT_T_STEPS).map_err(|e| e.to_string())?;
    let solution = solve_fluid(&problem).map_err(|e| e.to_string())?;
    check(solution.status == LpStatus::Optimal, format!("LP status {:?}", solution.status))?;
    let policy = extract_policy(&solution, &problem).map_err(|e| e.to_string())?;
    check(policy.is_front_loaded(), format!("quotas increase somewhere: {:?}", policy.quotas))?;
    check(
        policy.quotas[1][0] > policy.quotas[0][0],
        format!("class-2 day-1 quota {} not above class-1 {}", policy.quotas[1][0], policy.quotas[0][0]),
    )?;
    Ok(format!("quotas {:?}", policy.quotas))
}

fn criterion_8() -> Outcome {
    let config = SimConfig {
        mdp: MdpConfig::reference_instance(),
        policy: BenchmarkPolicy::reference_quotas(),
        days: 365,
        replications: 10,
        seed: 8,
        warmup: 14,
    };
    let quota = QuotaPolicy::new("benchmark", config.policy.clone());
    let mut trace: Vec<TraceRow> = Vec::new();
    let report = run_policy(&config, &quota, Some(&mut trace)).map_err(|e| e.to_string())?;

    // (a) rebuild bookings per service day from the trace.
    let g = config.mdp.capacity;
    let mut per_day = vec![vec![0u32; config.days + 8]; config.replications];
    for row in &trace {
        for (off, n) in row.booked.iter().enumerate() {
            per_day[row.replication][row.day + off + 1] += n;
        }
    }
    let peak = per_day.iter().flatten().copied().max().unwrap_or(0);
    check(peak <= g, format!("a service day received {peak} bookings > {g}"))?;

    // (b) per class and replication.
    for rep in &report.per_replication {
        for m in &rep.per_class {
            check(
                m.arrivals == m.booked + m.rejected,
                format!("replication {} class {}: flow imbalance", rep.replication, m.class),
            )?;
        }
    }
    for i in 0..2 {
        let (a, b, r) = trace.iter().filter(|t| t.class == i + 1).fold((0u64, 0u64, 0u64), |acc, t| {
            (acc.0 + u64::from(t.arrivals), acc.1 + t.booked.iter().map(|&n| u64::from(n)).sum::<u64>(), acc.2 + u64::from(t.rejected))
        });
        check(a == b + r, format!("class {} flow imbalance in trace", i + 1))?;
    }

    // (c)
    let w1 = report.per_class[0].mean_wait.unwrap_or(f64::NAN);
    let w2 = report.per_class[1].mean_wait.unwrap_or(f64::NAN);
    check(w2 < w1, format!("class-2 mean wait {w2:.3} not below class-1 {w1:.3}"))?;

    // (d)
    let first = serde_json::to_vec(&report).map_err(|e| e.to_string())?;
    let again = serde_json::to_vec(&run_simulation(&config).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(first == again, "reports differ between identical runs")?;
    Ok(format!(
        "peak day load {peak}/{g}; flows balance; mean wait class 2 {w2:.3} < class 1 {w1:.3} days; reruns byte-identical"
    ))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut optimal, mut infeasible) = (0, 0);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let lp = common::random_lp(&mut rng);
        let s = lp.solve().map_err(|e| e.to_string())?;
        match common::vertex_min(&lp) {
            Some(v) => {
                check(s.status == LpStatus::Optimal, format!("case {case}: status {:?}, oracle {v}", s.status))?;
                let rel = (s.objective - v).abs() / v.abs().max(1.0);
                worst = worst.max(rel);
                check(rel <= 1e-8, format!("case {case}: simplex {} vs vertices {v}", s.objective))?;
                optimal += 1;
            }
            None => {
                check(s.status == LpStatus::Infeasible, format!("case {case}: oracle infeasible, simplex {:?}", s.status))?;
                infeasible += 1;
            }
        }
    }
    Ok(format!("{optimal} optimal and {infeasible} infeasible LPs agree; worst relative error {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("1 k-means vs exhaustive partitions", criterion_1, Duration::from_secs(10)),
        ("2 Ward vs brute-force merges", criterion_2, Duration::from_secs(1)),
        ("3 silhouette ordering on the patient data", criterion_3, Duration::from_secs(30)),
        ("4 elbow on the patient data", criterion_4, Duration::from_secs(60)),
        ("5 wrapper on informative + noise features", criterion_5, Duration::from_secs(5)),
        ("6 fluid vs exact on the toy instance", criterion_6, Duration::from_secs(120)),
        ("7 published instance policy shape", criterion_7, Duration::from_secs(30)),
        ("8 simulator properties", criterion_8, Duration::from_secs(60)),
        ("9 simplex vs vertex enumeration", criterion_9, Duration::from_secs(10)),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{took:.2?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{took:.2?}]: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
