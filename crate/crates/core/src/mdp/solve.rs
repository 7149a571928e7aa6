//! Exact dynamic programming on small instances.

use std::io;

use rayon::prelude::*;
use serde::Serialize;

use super::{enumerate_actions, stage_cost, truncated_poisson_pmf, ActionMatrix, MdpConfig, MdpState};
use crate::error::{Error, Result};

/// Refuse exact solution above this many states.
pub const MAX_STATES: usize = 100_000;
const MAX_TOTAL_ACTIONS: usize = 50_000_000;
const MAX_SWEEPS: usize = 1_000_000;

/// Every state with `x_i <= D_i` and `y_H = G`, indexed in mixed radix
/// (`x` major, then `y_1..y_{H-1}`).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    config: MdpConfig,
    x_count: usize,
    y_count: usize,
}

impl StateSpace {
    pub fn new(config: &MdpConfig) -> Result<Self> {
        config.validate()?;
        let too_big = || {
            Error::Size(format!(
                "state space exceeds {MAX_STATES} states; use the fluid solver for instances this large"
            ))
        };
        let mut x_count = 1usize;
        for &d in &config.d_max {
            x_count = x_count.checked_mul(d as usize + 1).ok_or_else(too_big)?;
        }
        let mut y_count = 1usize;
        for _ in 1..config.horizon {
            y_count = y_count.checked_mul(config.capacity as usize + 1).ok_or_else(too_big)?;
        }
        match x_count.checked_mul(y_count) {
            Some(n) if n <= MAX_STATES => Ok(Self {
                config: config.clone(),
                x_count,
                y_count,
            }),
            _ => Err(too_big()),
        }
    }

    pub fn config(&self) -> &MdpConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.x_count * self.y_count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, state: &MdpState) -> Option<usize> {
        state.validate(&self.config).ok()?;
        Some(self.x_index(&state.x) * self.y_count + self.y_index(&state.y))
    }

    pub fn state(&self, index: usize) -> MdpState {
        let (mut xi, mut yi) = (index / self.y_count, index % self.y_count);
        let mut x = vec![0; self.config.classes];
        for i in (0..self.config.classes).rev() {
            let radix = self.config.d_max[i] as usize + 1;
            x[i] = (xi % radix) as u32;
            xi /= radix;
        }
        let g = self.config.capacity;
        let mut y = vec![g; self.config.horizon];
        for h in (0..self.config.horizon - 1).rev() {
            y[h] = (yi % (g as usize + 1)) as u32;
            yi /= g as usize + 1;
        }
        MdpState { x, y }
    }

    fn x_index(&self, x: &[u32]) -> usize {
        x.iter()
            .zip(&self.config.d_max)
            .fold(0, |acc, (&v, &d)| acc * (d as usize + 1) + v as usize)
    }

    fn y_index(&self, y: &[u32]) -> usize {
        let radix = self.config.capacity as usize + 1;
        y[..y.len() - 1].iter().fold(0, |acc, &v| acc * radix + v as usize)
    }

    /// Joint probability of each arrival vector, indexed like `x`.
    fn arrival_probs(&self) -> Vec<f64> {
        let pmfs: Vec<Vec<f64>> = self
            .config
            .arrival_rates
            .iter()
            .zip(&self.config.d_max)
            .map(|(&l, &d)| truncated_poisson_pmf(l, d))
            .collect();
        (0..self.x_count)
            .map(|xi| {
                let x = self.state(xi * self.y_count).x;
                x.iter().zip(&pmfs).map(|(&v, p)| p[v as usize]).product()
            })
            .collect()
    }

    /// Calendar index reached after booking `action` in `state`.
    fn next_y(&self, state: &MdpState, action: &ActionMatrix) -> usize {
        let radix = self.config.capacity as usize + 1;
        (1..self.config.horizon).fold(0, |acc, h| acc * radix + (state.y[h] - action.col_sum(h)) as usize)
    }
}

/// For one state, the cheapest action leading to each reachable calendar.
#[derive(Debug, Clone)]
struct Choice {
    next_y: usize,
    cost: f64,
    action: ActionMatrix,
}

struct Model {
    space: StateSpace,
    probs: Vec<f64>,
    choices: Vec<Vec<Choice>>,
}

impl Model {
    fn build(config: &MdpConfig) -> Result<Self> {
        let space = StateSpace::new(config)?;
        let probs = space.arrival_probs();
        let choices: Vec<Vec<Choice>> = (0..space.len())
            .into_par_iter()
            .map(|s| {
                let state = space.state(s);
                let mut best: Vec<Option<Choice>> = vec![None; space.y_count];
                for action in enumerate_actions(&state, config)? {
                    let cost = stage_cost(&state, &action, config)?;
                    let next_y = space.next_y(&state, &action);
                    match &best[next_y] {
                        Some(c) if c.cost <= cost => {}
                        _ => best[next_y] = Some(Choice { next_y, cost, action }),
                    }
                }
                Ok(best.into_iter().flatten().collect())
            })
            .collect::<Result<_>>()?;
        let total: usize = choices.iter().map(Vec::len).sum();
        if total > MAX_TOTAL_ACTIONS {
            return Err(Error::Size(format!("{total} distinct state-action pairs")));
        }
        Ok(Self { space, probs, choices })
    }

    /// `E[h(x', y)]` for every calendar index `y`.
    fn expect(&self, h: &[f64]) -> Vec<f64> {
        let yc = self.space.y_count;
        (0..yc)
            .map(|y| self.probs.iter().enumerate().map(|(x, p)| p * h[x * yc + y]).sum())
            .collect()
    }

    /// Minimum over choices of `cost + weight * ev[next_y]`, first choice on ties.
    fn greedy(&self, ev: &[f64], weight: f64) -> Vec<(f64, usize)> {
        self.choices
            .par_iter()
            .map(|cs| {
                let mut best = (f64::INFINITY, 0);
                for (k, c) in cs.iter().enumerate() {
                    let q = c.cost + weight * ev[c.next_y];
                    if q < best.0 {
                        best = (q, k);
                    }
                }
                best
            })
            .collect()
    }
}

/// Optimal discounted values and a greedy policy over the full state space.
#[derive(Debug, Clone)]
pub struct ValueTable {
    space: StateSpace,
    pub values: Vec<f64>,
    pub policy: Vec<ActionMatrix>,
    pub iterations: usize,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    /// Long-run average cost, filled by [`relative_value_iteration`].
    pub gain: Option<f64>,
}

#[derive(Serialize)]
struct Row<'a> {
    x: &'a [u32],
    y: &'a [u32],
    value: f64,
}

impl ValueTable {
    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn value(&self, state: &MdpState) -> Option<f64> {
        self.space.index(state).map(|i| self.values[i])
    }

    pub fn action(&self, state: &MdpState) -> Option<&ActionMatrix> {
        self.space.index(state).map(|i| &self.policy[i])
    }

    /// One row per state: `x_*`, `y_*`, `value`, then `a_<class>_<day>`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let c = self.space.config();
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=c.classes).map(|i| format!("x_{i}")).collect();
        header.extend((1..=c.horizon).map(|h| format!("y_{h}")));
        header.push("value".into());
        for i in 1..=c.classes {
            header.extend((1..=c.horizon).map(|h| format!("a_{i}_{h}")));
        }
        w.write_record(&header)?;
        for (s, (&v, a)) in self.values.iter().zip(&self.policy).enumerate() {
            let state = self.space.state(s);
            let row = Row { x: &state.x, y: &state.y, value: v };
            let mut rec: Vec<String> = row.x.iter().chain(row.y).map(u32::to_string).collect();
            rec.push(row.value.to_string());
            rec.extend(a.rows().into_iter().flatten().map(|n| n.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Discounted value iteration from zero until a sweep changes no value by
/// more than `tol`.
pub fn value_iteration(config: &MdpConfig, tol: f64) -> Result<ValueTable> {
    if !(tol > 0.0) {
        return Err(Error::arg("tolerance must be positive"));
    }
    let model = Model::build(config)?;
    let gamma = config.discount;
    let mut v = vec![0.0; model.space.len()];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while residual >= tol {
        if iterations == MAX_SWEEPS {
            return Err(Error::Internal(format!(
                "value iteration did not converge in {MAX_SWEEPS} sweeps (residual {residual})"
            )));
        }
        let next: Vec<f64> = model.greedy(&model.expect(&v), gamma).into_iter().map(|b| b.0).collect();
        residual = v.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        iterations += 1;
    }
    let best = model.greedy(&model.expect(&v), gamma);
    let policy = best
        .iter()
        .zip(&model.choices)
        .map(|(&(_, k), cs)| cs[k].action.clone())
        .collect();
    Ok(ValueTable {
        space: model.space,
        values: v,
        policy,
        iterations,
        residual,
        gain: None,
    })
}

/// Minimal long-run average cost per day, by relative value iteration on
/// the lazy chain (stay put with probability one half), which has the same
/// gain and is aperiodic. Stops when the span of `Th - h` is below `tol`;
/// the returned gain is the midpoint of the resulting bounds. `values`
/// holds the relative values, normalized to zero at the empty state.
pub fn relative_value_iteration(config: &MdpConfig, tol: f64) -> Result<ValueTable> {
    if !(tol > 0.0) {
        return Err(Error::arg("tolerance must be positive"));
    }
    let model = Model::build(config)?;
    const TAU: f64 = 0.5;
    let n = model.space.len();
    let anchor = model.space.index(&MdpState::initial(config)).expect("initial state");
    let mut h = vec![0.0; n];
    let mut iterations = 0;
    loop {
        if iterations == MAX_SWEEPS {
            return Err(Error::Internal("relative value iteration did not converge".into()));
        }
        iterations += 1;
        let best = model.greedy(&model.expect(&h), TAU);
        let th: Vec<f64> = best.iter().zip(&h).map(|(b, hs)| b.0 + (1.0 - TAU) * hs).collect();
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(a, b)| a - b)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let shift = th[anchor];
        h = th.iter().map(|v| v - shift).collect();
        if hi - lo < tol {
            let policy = best
                .iter()
                .zip(&model.choices)
                .map(|(&(_, k), cs)| cs[k].action.clone())
                .collect();
            return Ok(ValueTable {
                space: model.space,
                values: h,
                policy,
                iterations,
                residual: hi - lo,
                gain: Some(0.5 * (lo + hi)),
            });
        }
    }
}

/// Exact long-run average cost per day of a stationary policy, from the
/// stationary distribution of the chain it induces. The chain starts at an
/// empty calendar; states it never reaches get no weight.
pub fn average_cost<F>(config: &MdpConfig, policy: F) -> Result<f64>
where
    F: Fn(&MdpState) -> ActionMatrix + Sync,
{
    let space = StateSpace::new(config)?;
    let probs = space.arrival_probs();
    let step: Vec<(f64, usize)> = (0..space.len())
        .into_par_iter()
        .map(|s| {
            let state = space.state(s);
            let a = policy(&state);
            Ok((stage_cost(&state, &a, config)?, space.next_y(&state, &a)))
        })
        .collect::<Result<_>>()?;
    let yc = space.y_count;
    let start = space.index(&MdpState::initial(config)).expect("initial state") % yc;
    let mut pi = vec![0.0; space.len()];
    for (x, p) in probs.iter().enumerate() {
        pi[x * yc + start] = *p;
    }
    for _ in 0..MAX_SWEEPS {
        let mut mass = vec![0.0; yc];
        for (p, &(_, y)) in pi.iter().zip(&step) {
            mass[y] += p;
        }
        let mut change = 0.0;
        for (s, p) in pi.iter_mut().enumerate() {
            let moved = probs[s / yc] * mass[s % yc];
            let lazy = 0.5 * (*p + moved);
            change += (lazy - *p).abs();
            *p = lazy;
        }
        if change < 1e-14 {
            return Ok(pi.iter().zip(&step).map(|(p, (c, _))| p * c).sum());
        }
    }
    Err(Error::Internal("stationary distribution did not converge".into()))
}
