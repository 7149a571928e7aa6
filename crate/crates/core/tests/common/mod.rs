#![allow(dead_code)]

use apptsched::lp::{LinearProgram, Relation};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random LP with up to 8 variables, kept bounded by `Σx <= 20`.
pub fn random_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.random_range(2..=8);
    let m = rng.random_range(1..=5);
    let mut lp = LinearProgram::new();
    for j in 0..n {
        lp.add_var(format!("x{j}"), rng.random_range(-5..=5) as f64);
    }
    for r in 0..m {
        let terms = (0..n).map(|j| (j, rng.random_range(-4..=4) as f64)).collect();
        let relation = match rng.random_range(0..4) {
            0 => Relation::Ge,
            1 => Relation::Eq,
            _ => Relation::Le,
        };
        lp.add_constraint(format!("r{r}"), terms, relation, rng.random_range(-3..=10) as f64);
    }
    lp.add_constraint("box", (0..n).map(|j| (j, 1.0)).collect(), Relation::Le, 20.0);
    lp
}

/// Minimum over every basic feasible point: choose `n` tight constraints
/// (rows or sign bounds, always including equalities), solve, keep the
/// feasible ones. `None` if no vertex is feasible.
pub fn vertex_min(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.terms {
            a[j] += v;
        }
        rows.push((a, c.rhs, c.relation == Relation::Eq));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        rows.push((a, 0.0, false));
    }
    let eqs: Vec<usize> = (0..rows.len()).filter(|&r| rows[r].2).collect();
    let free: Vec<usize> = (0..rows.len()).filter(|&r| !rows[r].2).collect();
    if eqs.len() > n {
        // Still possible if some equalities are dependent; fall back to all subsets.
        return subsets_min(lp, &rows, &(0..rows.len()).collect::<Vec<_>>(), &[], n);
    }
    subsets_min(lp, &rows, &free, &eqs, n - eqs.len())
}

fn subsets_min(lp: &LinearProgram, rows: &[(Vec<f64>, f64, bool)], pool: &[usize], fixed: &[usize], pick: usize) -> Option<f64> {
    let n = lp.num_vars();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..pick).collect();
    if pick > pool.len() {
        return None;
    }
    loop {
        let active: Vec<usize> = fixed.iter().copied().chain(idx.iter().map(|&k| pool[k])).collect();
        let a = DMatrix::from_fn(n, n, |r, c| rows[active[r]].0[c]);
        let b = DVector::from_fn(n, |r, _| rows[active[r]].1);
        if let Some(x) = a.clone().lu().solve(&b) {
            let xs: Vec<f64> = x.iter().copied().collect();
            let residual = (&a * &x - &b).amax();
            if residual < 1e-9 && lp.max_violation(&xs) < 1e-9 {
                let v = lp.evaluate(&xs);
                best = Some(best.map_or(v, |b| b.min(v)));
            }
        }
        // Next combination.
        let mut k = pick;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < pool.len() - pick + k {
                idx[k] += 1;
                for t in k + 1..pick {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
        if pick == 0 {
            return best;
        }
    }
}
