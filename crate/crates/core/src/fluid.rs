//! Fluid relaxation of the booking problem.
//!
//! Demand and bookings are treated as continuous flows over a finite run of
//! days `t = 0..T`. The resulting linear program is solved with the simplex
//! code in [`crate::lp`], and a stationary quota table is read off the
//! middle of the horizon, away from start-up and end effects.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpStatus, Relation};
use crate::mdp::MdpConfig;

pub const DEFAULT_T_STEPS: usize = 28;
const SLICE_TOL: f64 = 1e-9;
/// Averages this close to an integer count as that integer when rounding.
const SNAP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidProblem {
    pub config: MdpConfig,
    /// `beta[i][h]`: lateness cost per unit booked `h + 1` days ahead.
    pub beta: Vec<Vec<f64>>,
    /// Rejection cost per unit of unmet demand.
    pub gamma: Vec<f64>,
    /// `lambda_t[t][i]`: arrival rate of class `i` on day `t`.
    pub lambda_t: Vec<Vec<f64>>,
    pub t_steps: usize,
    /// Step length in days. Only 1 is supported since the calendar rolls one day per step.
    pub dt: f64,
    /// Demand to allocate at `t = 0`.
    pub x0: Vec<f64>,
    /// Free slots at `t = 0`.
    pub y0: Vec<f64>,
    /// Among optimal solutions, prefer the one booking earliest.
    pub earliest_tiebreak: bool,
    /// Only allow bookings whose service day is at most day `T`.
    /// Otherwise slots past the horizon act as free capacity.
    pub closed_end: bool,
}

impl FluidProblem {
    /// Constant arrival rates, steady demand at `t = 0` and an empty calendar.
    pub fn from_config(config: &MdpConfig, t_steps: usize) -> Result<Self> {
        config.validate()?;
        let p = Self {
            config: config.clone(),
            beta: config.late_costs.clone(),
            gamma: config.reject_costs.clone(),
            lambda_t: vec![config.arrival_rates.clone(); t_steps],
            t_steps,
            dt: 1.0,
            x0: config.arrival_rates.clone(),
            y0: vec![f64::from(config.capacity); config.horizon],
            earliest_tiebreak: true,
            closed_end: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    pub fn horizon(&self) -> usize {
        self.config.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let (i, h) = (self.classes(), self.horizon());
        if self.t_steps < h {
            return Err(Error::arg(format!(
                "fluid horizon T = {} is shorter than the booking horizon H = {h}",
                self.t_steps
            )));
        }
        if self.dt != 1.0 {
            return Err(Error::arg(format!("dt = {} unsupported; the calendar rolls one day per step", self.dt)));
        }
        let dims_ok = self.beta.len() == i
            && self.beta.iter().all(|r| r.len() == h)
            && self.gamma.len() == i
            && self.lambda_t.len() == self.t_steps
            && self.lambda_t.iter().all(|r| r.len() == i)
            && self.x0.len() == i
            && self.y0.len() == h;
        if !dims_ok {
            return Err(Error::arg("fluid problem dimensions are inconsistent"));
        }
        let nonneg = |v: &f64| v.is_finite() && *v >= 0.0;
        if !(self.beta.iter().flatten().all(nonneg)
            && self.gamma.iter().all(nonneg)
            && self.lambda_t.iter().flatten().all(nonneg)
            && self.x0.iter().all(nonneg)
            && self.y0.iter().all(nonneg))
        {
            return Err(Error::arg("fluid costs, rates and initial state must be non-negative"));
        }
        let g = f64::from(self.config.capacity);
        if self.y0.iter().any(|&v| v > g) {
            return Err(Error::arg("initial free slots exceed capacity"));
        }
        Ok(())
    }

    /// Demand available on day `t`.
    pub fn demand(&self, t: usize, class: usize) -> f64 {
        if t == 0 {
            self.x0[class]
        } else {
            self.lambda_t[t][class] * self.dt
        }
    }

    /// Index of `u[t][i][h]` in a flat control vector.
    pub fn u_index(&self, t: usize, class: usize, offset: usize) -> usize {
        (t * self.classes() + class) * self.horizon() + offset
    }

    /// Whether booking `offset + 1` days ahead on day `t` is allowed.
    pub fn bookable(&self, t: usize, offset: usize) -> bool {
        !self.closed_end || t + offset < self.t_steps
    }

    pub fn u_len(&self) -> usize {
        self.t_steps * self.classes() * self.horizon()
    }

    /// Free-slot trajectory `y[t][h]` produced by the controls.
    pub fn trajectory(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let (ic, h) = (self.classes(), self.horizon());
        let g = f64::from(self.config.capacity);
        let mut y = vec![self.y0.clone()];
        for t in 0..self.t_steps - 1 {
            let prev = &y[t];
            let mut next = Vec::with_capacity(h);
            for off in 1..h {
                let booked: f64 = (0..ic).map(|i| u[self.u_index(t, i, off)]).sum();
                next.push(prev[off] - booked);
            }
            next.push(g);
            y.push(next);
        }
        y
    }

    /// Worst violation of the per-day capacity, demand and sign constraints.
    pub fn max_violation(&self, u: &[f64]) -> f64 {
        let (ic, h) = (self.classes(), self.horizon());
        let y = self.trajectory(u);
        let mut worst = u.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for (t, yt) in y.iter().enumerate() {
            for off in 0..h {
                let booked: f64 = (0..ic).map(|i| u[self.u_index(t, i, off)]).sum();
                worst = worst.max(booked - yt[off]).max(-yt[off]);
            }
            for i in 0..ic {
                let booked: f64 = (0..h).map(|off| u[self.u_index(t, i, off)]).sum();
                worst = worst.max(booked - self.demand(t, i));
                for off in (0..h).filter(|&off| !self.bookable(t, off)) {
                    worst = worst.max(u[self.u_index(t, i, off)].abs());
                }
            }
        }
        worst
    }

    /// Lateness plus rejection cost of the controls, summed over days.
    pub fn cost(&self, u: &[f64]) -> f64 {
        let (ic, h) = (self.classes(), self.horizon());
        let mut total = 0.0;
        for t in 0..self.t_steps {
            for i in 0..ic {
                let mut booked = 0.0;
                for off in 0..h {
                    let v = u[self.u_index(t, i, off)];
                    booked += v;
                    total += self.beta[i][off] * v;
                }
                total += self.gamma[i] * (self.demand(t, i) - booked);
            }
        }
        total
    }
}

/// The LP over controls `u[t][i][h]` (first, in [`FluidProblem::u_index`]
/// order) and free slots `y[t][h]` (after).
pub fn build_fluid_lp(problem: &FluidProblem) -> Result<LinearProgram> {
    problem.validate()?;
    let (ic, h, tn) = (problem.classes(), problem.horizon(), problem.t_steps);
    let mut lp = LinearProgram::new();
    for t in 0..tn {
        for i in 0..ic {
            for off in 0..h {
                lp.add_var(
                    format!("u_{}_{}_{}", t, i + 1, off + 1),
                    problem.beta[i][off] - problem.gamma[i],
                );
            }
        }
    }
    let y_base = lp.num_vars();
    let y_var = |t: usize, off: usize| y_base + t * h + off;
    for t in 0..tn {
        for off in 0..h {
            lp.add_var(format!("y_{}_{}", t, off + 1), 0.0);
        }
    }
    lp.constant = (0..tn)
        .flat_map(|t| (0..ic).map(move |i| (t, i)))
        .map(|(t, i)| problem.gamma[i] * problem.demand(t, i))
        .sum();

    for off in 0..h {
        lp.add_constraint(format!("init_{}", off + 1), vec![(y_var(0, off), 1.0)], Relation::Eq, problem.y0[off]);
    }
    let g = f64::from(problem.config.capacity);
    for t in 0..tn {
        if t + 1 < tn {
            for off in 0..h - 1 {
                let mut terms = vec![(y_var(t + 1, off), 1.0), (y_var(t, off + 1), -1.0)];
                terms.extend((0..ic).map(|i| (problem.u_index(t, i, off + 1), 1.0)));
                lp.add_constraint(format!("roll_{}_{}", t, off + 1), terms, Relation::Eq, 0.0);
            }
            lp.add_constraint(format!("refill_{}", t + 1), vec![(y_var(t + 1, h - 1), 1.0)], Relation::Eq, g);
        }
        for off in 0..h {
            let mut terms: Vec<(usize, f64)> = (0..ic).map(|i| (problem.u_index(t, i, off), 1.0)).collect();
            terms.push((y_var(t, off), -1.0));
            lp.add_constraint(format!("cap_{}_{}", t, off + 1), terms, Relation::Le, 0.0);
        }
        for i in 0..ic {
            let terms = (0..h).map(|off| (problem.u_index(t, i, off), 1.0)).collect();
            lp.add_constraint(format!("dem_{}_{}", t, i + 1), terms, Relation::Le, problem.demand(t, i));
        }
        let closed: Vec<(usize, f64)> = (0..ic)
            .flat_map(|i| (0..h).map(move |off| (i, off)))
            .filter(|&(_, off)| !problem.bookable(t, off))
            .map(|(i, off)| (problem.u_index(t, i, off), 1.0))
            .collect();
        if !closed.is_empty() {
            lp.add_constraint(format!("end_{t}"), closed, Relation::Le, 0.0);
        }
    }
    Ok(lp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidSolution {
    /// Flat `T × I × H` controls, see [`FluidProblem::u_index`].
    pub u: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

impl FluidSolution {
    pub fn get(&self, problem: &FluidProblem, t: usize, class: usize, offset: usize) -> f64 {
        self.u[problem.u_index(t, class, offset)]
    }
}

/// Builds and solves the fluid LP. With `earliest_tiebreak`, a second LP
/// holds the cost at its optimum and minimizes `Σ (h+1)·u`.
pub fn solve_fluid(problem: &FluidProblem) -> Result<FluidSolution> {
    let mut lp = build_fluid_lp(problem)?;
    let first = lp.solve()?;
    let mut iterations = first.iterations;
    let mut x = match first.status {
        LpStatus::Optimal => first.x,
        LpStatus::Infeasible => {
            return Ok(FluidSolution {
                u: vec![0.0; problem.u_len()],
                objective: f64::NAN,
                status: LpStatus::Infeasible,
                iterations,
            })
        }
        LpStatus::Unbounded => {
            return Err(Error::Internal("fluid LP reported unbounded; its variables are all bounded".into()))
        }
    };
    if problem.earliest_tiebreak {
        let opt = first.objective;
        let terms: Vec<(usize, f64)> = lp.objective.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect();
        lp.add_constraint("cost_cap", terms, Relation::Le, opt - lp.constant + 1e-11 * (1.0 + opt.abs()));
        let mut earliness = vec![0.0; lp.num_vars()];
        for t in 0..problem.t_steps {
            for i in 0..problem.classes() {
                for off in 0..problem.horizon() {
                    earliness[problem.u_index(t, i, off)] = (off + 1) as f64;
                }
            }
        }
        lp.objective = earliness;
        lp.constant = 0.0;
        let second = lp.solve()?;
        iterations += second.iterations;
        if second.status != LpStatus::Optimal {
            return Err(Error::Internal(format!("tie-break LP ended {:?}", second.status)));
        }
        x = second.x;
    }
    let u = x[..problem.u_len()].to_vec();
    let violation = problem.max_violation(&u);
    if violation > 1e-7 {
        return Err(Error::Internal(format!("fluid solution violates constraints by {violation}")));
    }
    let objective = problem.cost(&u);
    if (objective - first.objective).abs() > 1e-6 * (1.0 + first.objective.abs()) {
        return Err(Error::Internal(format!(
            "fluid objective {} disagrees with re-evaluated cost {objective}",
            first.objective
        )));
    }
    if violation > SLICE_TOL {
        log::debug!("fluid solution slack violation {violation:.2e}");
    }
    Ok(FluidSolution {
        u,
        objective,
        status: LpStatus::Optimal,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Fluid,
    Manual,
}

/// Daily booking quotas per class (rows) and day offset (columns).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkPolicy {
    pub quotas: Vec<Vec<u32>>,
    pub provenance: Provenance,
}

impl BenchmarkPolicy {
    /// The published quota table for the two-class, seven-day instance.
    pub fn reference_quotas() -> Self {
        Self {
            quotas: vec![vec![15, 12, 9, 6, 3, 0, 0], vec![20, 17, 14, 11, 8, 5, 2]],
            provenance: Provenance::Manual,
        }
    }

    pub fn zeros(classes: usize, horizon: usize) -> Self {
        Self {
            quotas: vec![vec![0; horizon]; classes],
            provenance: Provenance::Manual,
        }
    }

    pub fn classes(&self) -> usize {
        self.quotas.len()
    }

    pub fn horizon(&self) -> usize {
        self.quotas.first().map_or(0, Vec::len)
    }

    pub fn check_dims(&self, config: &MdpConfig) -> Result<()> {
        if self.classes() != config.classes || self.quotas.iter().any(|r| r.len() != config.horizon) {
            return Err(Error::arg(format!(
                "policy is {}x{} but the model has {} classes and a {}-day horizon",
                self.classes(),
                self.horizon(),
                config.classes,
                config.horizon
            )));
        }
        Ok(())
    }

    /// Non-increasing in the day offset for every class.
    pub fn is_front_loaded(&self) -> bool {
        self.quotas.iter().all(|r| r.windows(2).all(|w| w[1] <= w[0]))
    }

    /// `class,day_1,...,day_H` with classes numbered from 1.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["class".to_string()];
        header.extend((1..=self.horizon()).map(|h| format!("day_{h}")));
        w.write_record(&header)?;
        for (i, row) in self.quotas.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(u32::to_string));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Averages the controls over days `H..=T-H`, floors them, then gives each
/// class `⌊Σ_h frac⌋` extra units on its earliest slots with a fractional
/// part, higher-priority classes first.
pub fn extract_policy(solution: &FluidSolution, problem: &FluidProblem) -> Result<BenchmarkPolicy> {
    if solution.status != LpStatus::Optimal {
        return Err(Error::arg(format!("fluid solution is {:?}", solution.status)));
    }
    let (ic, h, tn) = (problem.classes(), problem.horizon(), problem.t_steps);
    if tn < 2 * h {
        return Err(Error::arg(format!("T = {tn} leaves no interior window for H = {h}")));
    }
    let window = h..=tn - h;
    let len = window.clone().count() as f64;
    let mut quotas = vec![vec![0u32; h]; ic];
    for i in problem.config.priority_order() {
        let mut fracs = Vec::with_capacity(h);
        for off in 0..h {
            let avg: f64 = window.clone().map(|t| solution.get(problem, t, i, off)).sum::<f64>() / len;
            let whole = (avg + SNAP).floor().max(0.0);
            quotas[i][off] = whole as u32;
            fracs.push((avg - whole).max(0.0));
        }
        let mut extra = (fracs.iter().sum::<f64>() + SNAP).floor() as u32;
        for off in 0..h {
            if extra == 0 {
                break;
            }
            if fracs[off] > SNAP {
                quotas[i][off] += 1;
                extra -= 1;
            }
        }
    }
    Ok(BenchmarkPolicy {
        quotas,
        provenance: Provenance::Fluid,
    })
}
