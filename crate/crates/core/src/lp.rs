//! Dense revised simplex for small and medium linear programs.
//!
//! Problems are stated as `minimize c·x + constant` over `x >= 0` with
//! `<=`, `=` and `>=` rows. Phase one drives artificial variables to zero;
//! phase two optimizes the real objective. Pricing is Dantzig's rule, with
//! Bland's rule taking over while the objective stalls on degenerate pivots.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    /// Sparse row: `(variable, coefficient)`.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values; zeros unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub names: Vec<String>,
    pub objective: Vec<f64>,
    pub constant: f64,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a non-negative variable and returns its index.
    pub fn add_var(&mut self, name: impl Into<String>, cost: f64) -> usize {
        self.names.push(name.into());
        self.objective.push(cost);
        self.names.len() - 1
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    /// `c·x + constant`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    /// Largest violation of any row or sign constraint.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    /// CPLEX LP text format. The objective constant goes in a comment.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "\\ objective constant: {}", self.constant);
        s.push_str("Minimize\n obj:");
        let obj: Vec<(usize, f64)> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(j, &c)| (j, c))
            .collect();
        self.write_terms(&mut s, &obj);
        s.push_str("\nSubject To\n");
        for c in &self.constraints {
            let _ = write!(s, " {}:", c.name);
            self.write_terms(&mut s, &c.terms);
            let op = match c.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", c.rhs);
        }
        s.push_str("End\n");
        s
    }

    fn write_terms(&self, s: &mut String, terms: &[(usize, f64)]) {
        if terms.is_empty() {
            s.push_str(" 0");
        }
        for (k, &(j, a)) in terms.iter().enumerate() {
            match (k, a < 0.0) {
                (0, false) => {}
                (_, true) => s.push_str(" -"),
                (_, false) => s.push_str(" +"),
            }
            let _ = write!(s, " {} {}", a.abs(), self.names[j]);
        }
    }

    pub fn solve(&self) -> Result<LpSolution> {
        Simplex::new(self)?.run(self)
    }
}

const FEAS_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;
const STALL_LIMIT: usize = 30;

/// Standard form `A z = b`, `z >= 0`, `b >= 0`: structural columns, then
/// one slack or surplus per inequality row, then artificials.
struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    n_struct: usize,
    first_artificial: usize,
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    binv: DMatrix<f64>,
    xb: Vec<f64>,
    iterations: usize,
    max_iterations: usize,
}

impl Simplex {
    fn new(lp: &LinearProgram) -> Result<Self> {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut b = Vec::with_capacity(m);
        let mut flips = Vec::with_capacity(m);
        for (r, c) in lp.constraints.iter().enumerate() {
            if !c.rhs.is_finite() || c.terms.iter().any(|(j, a)| *j >= n || !a.is_finite()) {
                return Err(Error::arg(format!("malformed constraint {}", c.name)));
            }
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            flips.push(sign);
            b.push(sign * c.rhs);
            for &(j, a) in &c.terms {
                if a != 0.0 {
                    match cols[j].last_mut() {
                        Some((row, v)) if *row == r => *v += sign * a,
                        _ => cols[j].push((r, sign * a)),
                    }
                }
            }
        }
        let mut basis = vec![usize::MAX; m];
        for (r, c) in lp.constraints.iter().enumerate() {
            let rel = match (c.relation, flips[r] < 0.0) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (rel, _) => rel,
            };
            match rel {
                Relation::Le => {
                    basis[r] = cols.len();
                    cols.push(vec![(r, 1.0)]);
                }
                Relation::Ge => cols.push(vec![(r, -1.0)]),
                Relation::Eq => {}
            }
        }
        let first_artificial = cols.len();
        for r in 0..m {
            if basis[r] == usize::MAX {
                basis[r] = cols.len();
                cols.push(vec![(r, 1.0)]);
            }
        }
        let mut in_basis = vec![false; cols.len()];
        basis.iter().for_each(|&j| in_basis[j] = true);
        let total = cols.len();
        Ok(Self {
            m,
            cols,
            xb: b.clone(),
            b,
            n_struct: n,
            first_artificial,
            basis,
            in_basis,
            binv: DMatrix::identity(m, m),
            iterations: 0,
            max_iterations: 100 * (m + total) + 1000,
        })
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let total = self.cols.len();
        if total > self.first_artificial {
            let mut phase1 = vec![0.0; total];
            phase1[self.first_artificial..].iter_mut().for_each(|c| *c = 1.0);
            let status = self.optimize(&phase1, total)?;
            debug_assert_eq!(status, LpStatus::Optimal, "phase one is bounded below");
            let infeas: f64 = self.basic_cost(&phase1);
            let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if infeas > FEAS_TOL * scale {
                return Ok(self.finish(lp, LpStatus::Infeasible));
            }
            self.drive_out_artificials();
        }
        let mut cost = vec![0.0; total];
        cost[..self.n_struct].copy_from_slice(&lp.objective);
        let status = self.optimize(&cost, self.first_artificial)?;
        Ok(self.finish(lp, status))
    }

    fn finish(&self, lp: &LinearProgram, status: LpStatus) -> LpSolution {
        let mut x = vec![0.0; self.n_struct];
        if status == LpStatus::Optimal {
            for (r, &j) in self.basis.iter().enumerate() {
                if j < self.n_struct {
                    x[j] = self.xb[r].max(0.0);
                }
            }
        }
        let objective = match status {
            LpStatus::Optimal => lp.evaluate(&x),
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        LpSolution {
            status,
            x,
            objective,
            iterations: self.iterations,
        }
    }

    fn basic_cost(&self, cost: &[f64]) -> f64 {
        self.basis.iter().zip(&self.xb).map(|(&j, v)| cost[j] * v).sum()
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let mut d = vec![0.0; self.m];
        for &(r, a) in &self.cols[j] {
            for (i, di) in d.iter_mut().enumerate() {
                *di += self.binv[(i, r)] * a;
            }
        }
        d
    }

    /// Simplex iterations over columns `0..allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> Result<LpStatus> {
        let mut since_refactor = 0;
        let mut stalled = 0;
        let mut last_obj = self.basic_cost(cost);
        loop {
            if self.iterations >= self.max_iterations {
                return Err(Error::Internal(format!(
                    "simplex exceeded {} iterations",
                    self.max_iterations
                )));
            }
            let bland = stalled >= STALL_LIMIT;
            // Duals y = c_B B⁻¹.
            let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
            let y: Vec<f64> = (0..self.m)
                .map(|c| (0..self.m).map(|r| cb[r] * self.binv[(r, c)]).sum())
                .collect();
            let mut entering = None;
            let mut best = -FEAS_TOL;
            for j in 0..allowed {
                if self.in_basis[j] {
                    continue;
                }
                let rc = cost[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>();
                if rc < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(q) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let d = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut ratio = f64::INFINITY;
            for r in 0..self.m {
                if d[r] <= PIVOT_TOL {
                    continue;
                }
                let t = self.xb[r].max(0.0) / d[r];
                let better = match leave {
                    None => true,
                    Some(_) if t < ratio - 1e-12 => true,
                    Some(l) if t <= ratio + 1e-12 => {
                        if bland {
                            self.basis[r] < self.basis[l]
                        } else {
                            d[r] > d[l]
                        }
                    }
                    _ => false,
                };
                if better {
                    leave = Some(r);
                    ratio = ratio.min(t);
                }
            }
            let Some(p) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(p, q, &d);
            self.iterations += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
            let obj = self.basic_cost(cost);
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stalled = 0;
                last_obj = obj;
            } else {
                stalled += 1;
            }
        }
    }

    fn pivot(&mut self, p: usize, q: usize, d: &[f64]) {
        let m = self.m;
        let dp = d[p];
        let theta = self.xb[p] / dp;
        for r in 0..m {
            if r != p {
                self.xb[r] -= theta * d[r];
            }
        }
        self.xb[p] = theta;
        for c in 0..m {
            let v = self.binv[(p, c)] / dp;
            if v == 0.0 {
                continue;
            }
            self.binv[(p, c)] = v;
            for r in 0..m {
                if r != p && d[r] != 0.0 {
                    self.binv[(r, c)] -= d[r] * v;
                }
            }
        }
        self.in_basis[self.basis[p]] = false;
        self.in_basis[q] = true;
        self.basis[p] = q;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                bmat[(r, k)] = a;
            }
        }
        self.binv = bmat
            .try_inverse()
            .ok_or_else(|| Error::Internal("singular simplex basis".into()))?;
        self.xb = (0..m)
            .map(|r| (0..m).map(|c| self.binv[(r, c)] * self.b[c]).sum())
            .collect();
        Ok(())
    }

    /// Pivots zero-valued artificials out of the basis where some real
    /// column can replace them. Those that remain sit on redundant rows.
    fn drive_out_artificials(&mut self) {
        for p in 0..self.m {
            if self.basis[p] < self.first_artificial {
                continue;
            }
            let replacement = (0..self.first_artificial).find(|&j| {
                !self.in_basis[j] && {
                    let row_dot: f64 = self.cols[j].iter().map(|&(r, a)| self.binv[(p, r)] * a).sum();
                    row_dot.abs() > 1e-7
                }
            });
            if let Some(q) = replacement {
                let d = self.ftran(q);
                self.pivot(p, q, &d);
                self.iterations += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_cover() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        let y = lp.add_var("y", 1.0);
        lp.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Relation::Ge, 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn classic_max_problem() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", -3.0);
        let y = lp.add_var("y", -5.0);
        lp.add_constraint("a", vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint("b", vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint("c", vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        lp.add_constraint("lo", vec![(x, 1.0)], Relation::Ge, 2.0);
        lp.add_constraint("hi", vec![(x, 1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", -1.0);
        let y = lp.add_var("y", 0.0);
        lp.add_constraint("c", vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp.solve().unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_and_degenerate_rows() {
        // Equality repeated twice plus a dominated inequality.
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        let y = lp.add_var("y", 2.0);
        let z = lp.add_var("z", 0.0);
        lp.add_constraint("e1", vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint("e2", vec![(x, 2.0), (y, 2.0)], Relation::Eq, 2.0);
        lp.add_constraint("d1", vec![(x, 1.0), (z, 1.0)], Relation::Le, 1.0);
        lp.add_constraint("d2", vec![(x, 1.0), (y, 1.0), (z, 1.0)], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(lp.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn beale_cycling_example_terminates() {
        // Cycles under the textbook rule without anti-cycling.
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = ["x4", "x5", "x6", "x7"].iter().map(|n| lp.add_var(*n, 0.0)).collect();
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0];
        lp.add_constraint("r1", vec![(v[0], 0.25), (v[1], -60.0), (v[2], -0.04), (v[3], 9.0)], Relation::Le, 0.0);
        lp.add_constraint("r2", vec![(v[0], 0.5), (v[1], -90.0), (v[2], -0.02), (v[3], 3.0)], Relation::Le, 0.0);
        lp.add_constraint("r3", vec![(v[2], 1.0)], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_and_constant() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 2.0);
        lp.constant = 3.0;
        lp.add_constraint("c", vec![(x, -1.0)], Relation::Le, -2.0);
        let s = lp.solve().unwrap();
        assert!((s.objective - 7.0).abs() < 1e-12);
    }

    #[test]
    fn lp_text_format() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var("x", 1.0);
        let y = lp.add_var("y", -2.5);
        lp.add_constraint("cap", vec![(x, 1.0), (y, -1.0)], Relation::Le, 4.0);
        let text = lp.to_lp_string();
        assert!(text.contains("Minimize\n obj: 1 x - 2.5 y\n"));
        assert!(text.contains(" cap: 1 x - 1 y <= 4\n"));
        assert!(text.ends_with("End\n"));
    }
}
