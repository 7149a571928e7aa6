use apptsched::fluid::{build_fluid_lp, solve_fluid, FluidProblem, DEFAULT_T_STEPS};
use apptsched::lp::LpStatus;
use apptsched::mdp::MdpConfig;

fn instances() -> Vec<MdpConfig> {
    let mut skewed = MdpConfig::reference_instance();
    skewed.arrival_rates = vec![20.0, 95.0];
    skewed.late_costs[1] = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let mut three = MdpConfig::toy_instance();
    three.classes = 3;
    three.horizon = 3;
    three.capacity = 5;
    three.d_max = vec![4, 4, 4];
    three.arrival_rates = vec![1.5, 2.0, 2.5];
    three.late_costs = vec![vec![0.0, 1.0, 2.0], vec![0.0, 0.5, 4.0], vec![1.0, 1.0, 1.0]];
    three.reject_costs = vec![3.0, 6.0, 9.0];
    vec![MdpConfig::toy_instance(), MdpConfig::reference_instance(), skewed, three]
}

/// Books each class's demand on the earliest open days, higher priority first.
fn greedy_earliest(p: &FluidProblem) -> Vec<f64> {
    let mut u = vec![0.0; p.u_len()];
    for t in 0..p.t_steps {
        let mut free = p.trajectory(&u)[t].clone();
        for i in p.config.priority_order() {
            let mut left = p.demand(t, i);
            for h in (0..p.horizon()).filter(|&h| p.bookable(t, h)) {
                let n = left.min(free[h]);
                u[p.u_index(t, i, h)] = n;
                free[h] -= n;
                left -= n;
            }
        }
    }
    u
}

/// Spreads each class's demand evenly over the open days, each class taking
/// at most an equal share of every day's free slots.
fn uniform_spread(p: &FluidProblem) -> Vec<f64> {
    let mut u = vec![0.0; p.u_len()];
    let ic = p.classes() as f64;
    for t in 0..p.t_steps {
        let free = p.trajectory(&u)[t].clone();
        let open: Vec<usize> = (0..p.horizon()).filter(|&h| p.bookable(t, h)).collect();
        if open.is_empty() {
            continue;
        }
        for i in 0..p.classes() {
            let each = p.demand(t, i) / open.len() as f64;
            for &h in &open {
                u[p.u_index(t, i, h)] = each.min(free[h] / ic);
            }
        }
    }
    u
}

#[test]
fn lp_beats_heuristic_controls() {
    for config in instances() {
        let p = FluidProblem::from_config(&config, DEFAULT_T_STEPS).unwrap();
        let s = solve_fluid(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(p.max_violation(&s.u) <= 1e-9);
        for (name, u) in [
            ("greedy", greedy_earliest(&p)),
            ("uniform", uniform_spread(&p)),
            ("reject", vec![0.0; p.u_len()]),
        ] {
            assert!(p.max_violation(&u) <= 1e-9, "{name} control infeasible");
            assert!(s.objective <= p.cost(&u) + 1e-6, "{name}: {} > {}", s.objective, p.cost(&u));
        }
    }
}

#[test]
fn lp_objective_matches_reevaluation() {
    for config in instances() {
        let mut p = FluidProblem::from_config(&config, DEFAULT_T_STEPS).unwrap();
        p.earliest_tiebreak = false;
        let lp = build_fluid_lp(&p).unwrap();
        let raw = lp.solve().unwrap();
        let cost = p.cost(&raw.x[..p.u_len()]);
        assert!((raw.objective - cost).abs() <= 1e-6 * cost.abs().max(1.0));
        let s = solve_fluid(&p).unwrap();
        assert!((s.objective - raw.objective).abs() <= 1e-6 * cost.abs().max(1.0));
    }
}

#[test]
fn scaling_costs_scales_the_optimum() {
    for config in instances() {
        let p = FluidProblem::from_config(&config, DEFAULT_T_STEPS).unwrap();
        let s = solve_fluid(&p).unwrap();
        let mut scaled = p.clone();
        let k = 3.7;
        scaled.beta.iter_mut().flatten().for_each(|b| *b *= k);
        scaled.gamma.iter_mut().for_each(|g| *g *= k);
        let t = solve_fluid(&scaled).unwrap();
        let tol = 1e-6 * t.objective.abs().max(1.0);
        assert!((t.objective - k * s.objective).abs() <= tol);
        assert!((scaled.cost(&s.u) - t.objective).abs() <= tol);
    }
}

#[test]
fn lp_dump_lists_every_row() {
    let p = FluidProblem::from_config(&MdpConfig::toy_instance(), 6).unwrap();
    let lp = build_fluid_lp(&p).unwrap();
    let text = lp.to_lp_string();
    let rows = text.lines().filter(|l| l.starts_with(' ') && l.contains(':') && !l.starts_with(" obj")).count();
    assert_eq!(rows, lp.constraints.len());
}
