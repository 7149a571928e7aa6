use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use apptsched::clustering::{elbow_scan, silhouette, ClusterParams, ClustererRegistry, ElbowCurve};
use apptsched::features::{entropy_rank, wrapper_select, EntropyRanking, SubsetSelection, WrapperOptions};
use apptsched::fluid::{build_fluid_lp, extract_policy, solve_fluid, BenchmarkPolicy, FluidProblem};
use apptsched::ingest::{encode_normalize, load_dataset, FeatureMatrix, FeatureSchema};
use apptsched::lp::LpStatus;
use apptsched::mdp::{average_cost, relative_value_iteration, value_iteration, MdpConfig};
use apptsched::sim::{
    compare_policies, run_policy, write_trace_csv, BookingPolicy, EarliestSlot, QuotaPolicy, RejectAll, SimConfig,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

type CliResult<T> = Result<T, CliError>;

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
        text.push('\n');
        self.text(name, &text)
    }

    fn text(&self, name: &str, text: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }

    fn with<F>(&self, name: &str, write: F) -> CliResult<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> apptsched::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write(&mut w)?;
        w.flush().map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }
}

fn start(cfg: &RunConfig) -> CliResult<Outputs> {
    let out = Outputs::create(&cfg.output_dir)?;
    out.json("run_config.json", cfg)?;
    Ok(out)
}

fn load_matrix(cfg: &RunConfig) -> CliResult<FeatureMatrix> {
    let path = cfg
        .dataset_path
        .as_ref()
        .ok_or_else(|| CliError::config("dataset_path is not set"))?;
    let schema = match &cfg.features {
        Some(names) => {
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            FeatureSchema::numeric(&names)
        }
        None => FeatureSchema::intake(),
    }
    .with_aliases(cfg.schema_aliases.clone());
    let records = load_dataset(path, &schema)?;
    Ok(encode_normalize(&records, &schema)?)
}

struct Selection {
    data: FeatureMatrix,
    k: usize,
    elbow: Option<ElbowCurve>,
    ranking: EntropyRanking,
    subset: SubsetSelection,
}

fn select_features(cfg: &RunConfig, out: &Outputs) -> CliResult<Selection> {
    let data = load_matrix(cfg)?;
    out.with("normalized_matrix.csv", |w| data.write_csv(w))?;
    let c = &cfg.clustering;
    let (k, elbow) = match c.k {
        Some(k) => (k, None),
        None => {
            let curve = elbow_scan(&data, c.k_max.min(data.rows()), c.seed, c.restarts)?;
            (curve.knee, Some(curve))
        }
    };
    if k < 2 {
        return Err(CliError::domain(format!("need at least 2 clusters, got k = {k}")));
    }
    let ranking = entropy_rank(&data)?;
    let opts = WrapperOptions {
        k,
        seed: c.seed,
        restarts: c.restarts,
        tolerance: cfg.feature_select.tolerance,
    };
    let subset = wrapper_select(&data, &ranking, &opts)?;
    out.json("entropy_ranking.json", &ranking)?;
    out.json("feature_subset.json", &subset)?;
    out.with("trace_curve.csv", |w| subset.write_trace_csv(&ranking.order, data.names(), w))?;
    Ok(Selection {
        data,
        k,
        elbow,
        ranking,
        subset,
    })
}

pub fn select(cfg: &RunConfig) -> CliResult<()> {
    let out = start(cfg)?;
    let sel = select_features(cfg, &out)?;
    println!(
        "k = {}: kept {} of {} features: {}",
        sel.k,
        sel.subset.selected.len(),
        sel.ranking.order.len(),
        sel.subset.names.join(", ")
    );
    Ok(())
}

#[derive(Serialize)]
struct MethodSummary {
    method: String,
    k: usize,
    cluster_sizes: Vec<usize>,
    wcss: f64,
    silhouette: f64,
}

#[derive(Serialize)]
struct ClusterSummary {
    k: usize,
    features: Vec<String>,
    methods: Vec<MethodSummary>,
    winner: String,
}

pub fn cluster(cfg: &RunConfig) -> CliResult<()> {
    let out = start(cfg)?;
    let c = &cfg.clustering;
    let mut sel = select_features(cfg, &out)?;
    let elbow = match sel.elbow.take() {
        Some(curve) => curve,
        None => elbow_scan(&sel.data, c.k_max.min(sel.data.rows()), c.seed, c.restarts)?,
    };
    out.json("elbow.json", &elbow)?;
    out.with("elbow.csv", |w| elbow.write_csv(w))?;

    let data = sel.data.select(&sel.subset.selected)?;
    let registry = ClustererRegistry::default();
    let params = ClusterParams {
        seed: c.seed,
        restarts: c.restarts,
    };
    let mut methods = Vec::new();
    let mut silhouettes = serde_json::Map::new();
    for name in ["kmeans", "ward"] {
        let result = registry.create(name, &params)?.fit(&data, sel.k)?;
        let report = silhouette(&data, &result.labels)?;
        out.json(&format!("{name}.json"), &result)?;
        methods.push(MethodSummary {
            method: name.to_string(),
            k: result.k,
            cluster_sizes: result.cluster_sizes(),
            wcss: result.wcss,
            silhouette: report.mean,
        });
        silhouettes.insert(name.to_string(), serde_json::to_value(&report).map_err(|e| CliError::io(e.to_string()))?);
    }
    out.json("silhouette.json", &silhouettes)?;
    let winner = methods
        .iter()
        .max_by(|a, b| a.silhouette.total_cmp(&b.silhouette))
        .map(|m| m.method.clone())
        .unwrap_or_default();
    for m in &methods {
        println!("{:<7} k = {} silhouette {:.4} sizes {:?}", m.method, m.k, m.silhouette, m.cluster_sizes);
    }
    println!("winner: {winner}");
    out.json(
        "cluster_summary.json",
        &ClusterSummary {
            k: sel.k,
            features: sel.subset.names.clone(),
            methods,
            winner,
        },
    )
}

fn fluid_problem(cfg: &RunConfig) -> CliResult<FluidProblem> {
    let mut problem = FluidProblem::from_config(&cfg.mdp, cfg.fluid.t_steps)?;
    problem.dt = cfg.fluid.dt;
    problem.validate()?;
    Ok(problem)
}

#[derive(Serialize)]
struct FluidSummary {
    status: LpStatus,
    objective: f64,
    iterations: usize,
    t_steps: usize,
    max_violation: f64,
    front_loaded: bool,
    /// `booking_rates[t][i][h]`: fluid bookings on day `t`, class `i`, `h + 1` days ahead.
    booking_rates: Vec<Vec<Vec<f64>>>,
}

#[derive(Serialize)]
struct ExactGap {
    fluid_policy_average_cost: f64,
    exact_average_cost: f64,
    optimal_average_cost: Option<f64>,
    gap_percent: Option<f64>,
    value_iterations: usize,
    states: usize,
}

pub fn schedule(cfg: &RunConfig, exact: bool) -> CliResult<()> {
    let out = start(cfg)?;
    let problem = fluid_problem(cfg)?;
    let lp = build_fluid_lp(&problem)?;
    out.text("fluid_lp.lp", &lp.to_lp_string())?;
    let solution = solve_fluid(&problem)?;
    if solution.status != LpStatus::Optimal {
        return Err(CliError::domain(format!("fluid LP is {:?}", solution.status)));
    }
    let policy = extract_policy(&solution, &problem)?;
    let (i_n, h_n) = (problem.classes(), problem.horizon());
    let rates = (0..problem.t_steps)
        .map(|t| {
            (0..i_n)
                .map(|i| (0..h_n).map(|h| solution.get(&problem, t, i, h)).collect())
                .collect()
        })
        .collect();
    out.json(
        "fluid_summary.json",
        &FluidSummary {
            status: solution.status,
            objective: solution.objective,
            iterations: solution.iterations,
            t_steps: problem.t_steps,
            max_violation: problem.max_violation(&solution.u),
            front_loaded: policy.is_front_loaded(),
            booking_rates: rates,
        },
    )?;
    out.json("policy.json", &policy)?;
    out.with("policy.csv", |w| policy.write_csv(w))?;
    println!("fluid LP objective {:.6} ({} pivots)", solution.objective, solution.iterations);
    for (i, row) in policy.quotas.iter().enumerate() {
        println!("class {}: {row:?}", i + 1);
    }

    if exact {
        let gap = exact_gap(&cfg.mdp, &policy, cfg.exact.tolerance)?;
        match gap.gap_percent {
            Some(g) => println!(
                "exact gap: fluid policy {:.6}/day vs exact {:.6}/day, {g:.2}%",
                gap.fluid_policy_average_cost, gap.exact_average_cost
            ),
            None => println!("exact gap: exact average cost is zero, gap undefined"),
        }
        out.json("exact_gap.json", &gap)?;
    }
    Ok(())
}

fn exact_gap(mdp: &MdpConfig, policy: &BenchmarkPolicy, tol: f64) -> CliResult<ExactGap> {
    let table = value_iteration(mdp, tol)?;
    let exact = average_cost(mdp, |s| table.action(s).cloned().expect("state in table"))?;
    let quota = QuotaPolicy::new("fluid", policy.clone());
    let fluid = average_cost(mdp, |s| quota.decide(s, mdp))?;
    let optimal = relative_value_iteration(mdp, tol)?.gain;
    let gap_percent = (exact.abs() > 0.0).then(|| 100.0 * (fluid - exact) / exact);
    Ok(ExactGap {
        fluid_policy_average_cost: fluid,
        exact_average_cost: exact,
        optimal_average_cost: optimal,
        gap_percent,
        value_iterations: table.iterations,
        states: table.space().len(),
    })
}

fn load_policy(cfg: &RunConfig, explicit: Option<&Path>) -> CliResult<BenchmarkPolicy> {
    let path = explicit.map(Path::to_path_buf).or_else(|| cfg.simulation.policy_path.clone());
    let policy = match path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => {
            let table = BenchmarkPolicy::reference_quotas();
            if table.check_dims(&cfg.mdp).is_err() {
                return Err(CliError::config(format!(
                    "no policy given and the built-in 2 x 7 table does not fit a {} x {} model; pass --policy",
                    cfg.mdp.classes, cfg.mdp.horizon
                )));
            }
            table
        }
    };
    policy.check_dims(&cfg.mdp)?;
    Ok(policy)
}

pub fn simulate(cfg: &RunConfig, policy_path: Option<&Path>, compare: bool, trace: bool) -> CliResult<()> {
    let out = start(cfg)?;
    let s = &cfg.simulation;
    let policy = load_policy(cfg, policy_path)?;
    let sim = SimConfig {
        mdp: cfg.mdp.clone(),
        policy: policy.clone(),
        days: s.days,
        replications: s.replications,
        seed: s.seed,
        warmup: s.warmup,
    };
    sim.validate()?;
    let benchmark = QuotaPolicy::new("benchmark", policy);
    let mut rows = Vec::new();
    let report = run_policy(&sim, &benchmark, trace.then_some(&mut rows))?;
    out.json("simulation_report.json", &report)?;
    if trace {
        let horizon = cfg.mdp.horizon;
        out.with("trace.csv", |w| write_trace_csv(&rows, horizon, w))?;
    }
    println!(
        "{}: {:.4} cost/day over {} replications, utilization {:.3}",
        report.policy, report.mean_daily_cost, report.replications, report.utilization
    );
    for m in &report.per_class {
        println!(
            "class {}: arrivals {} booked {} rejected {} mean wait {}",
            m.class,
            m.arrivals,
            m.booked,
            m.rejected,
            m.mean_wait.map_or_else(|| "-".to_string(), |w| format!("{w:.3}"))
        );
    }
    if compare {
        let fcfs = EarliestSlot;
        let reject = RejectAll;
        let policies: [&dyn BookingPolicy; 3] = [&benchmark, &fcfs, &reject];
        let comparison = compare_policies(&sim, &policies)?;
        for d in &comparison.differences {
            println!(
                "{} - {}: {:+.4}/day (95% CI {:+.4} to {:+.4})",
                d.policy, d.baseline, d.mean, d.ci95_low, d.ci95_high
            );
        }
        out.json("comparison.json", &comparison)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MdpSolution {
    states: usize,
    discount: f64,
    iterations: usize,
    residual: f64,
    greedy_average_cost: f64,
    optimal_average_cost: Option<f64>,
}

pub fn mdp_solve(cfg: &RunConfig) -> CliResult<()> {
    let out = start(cfg)?;
    let mdp = &cfg.mdp;
    for w in mdp.validate()? {
        log::warn!("{w}");
    }
    let table = value_iteration(mdp, cfg.exact.tolerance)?;
    out.with("value_table.csv", |w| table.write_csv(w))?;
    let greedy = average_cost(mdp, |s| table.action(s).cloned().expect("state in table"))?;
    let optimal = relative_value_iteration(mdp, cfg.exact.tolerance)?.gain;
    let summary = MdpSolution {
        states: table.space().len(),
        discount: mdp.discount,
        iterations: table.iterations,
        residual: table.residual,
        greedy_average_cost: greedy,
        optimal_average_cost: optimal,
    };
    println!(
        "{} states, {} sweeps, greedy policy {:.6}/day",
        summary.states, summary.iterations, greedy
    );
    out.json("mdp_solution.json", &summary)
}
