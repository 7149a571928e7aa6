//! The appointment-booking Markov decision process.
//!
//! At the end of each day the scheduler sees `x` (requests per priority
//! class) and `y` (free slots on each of the next `H` days) and books an
//! `I × H` matrix of appointments. Unbooked requests are rejected. Booked
//! slots are consumed, the horizon rolls forward one day, and the last day
//! opens with full capacity `G`.
//!
//! Day offsets are 0-based in code: column `h` of an action or entry `h` of
//! `y` refers to the day `h + 1` days ahead.

mod actions;
mod arrivals;
mod solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use actions::{action_count_bound, enumerate_actions, stage_cost, transition, MAX_ACTIONS};
pub use arrivals::{sample_arrivals, truncated_poisson_pmf};
pub use solve::{
    average_cost, relative_value_iteration, value_iteration, StateSpace, ValueTable, MAX_STATES,
};

fn default_discount() -> f64 {
    0.95
}

/// Model parameters. Serialized with the flat keys used in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpConfig {
    /// Number of priority classes `I`.
    pub classes: usize,
    /// Booking horizon `H` in days.
    pub horizon: usize,
    /// Appointment slots per day `G`.
    pub capacity: u32,
    /// Per-class cap on daily requests `D_i`; Poisson mass above it is lumped at it.
    pub d_max: Vec<u32>,
    /// Mean daily requests per class (patients/day).
    pub arrival_rates: Vec<f64>,
    /// `late_costs[i][h]`: cost per class-`i` patient booked `h + 1` days ahead.
    pub late_costs: Vec<Vec<f64>>,
    /// Cost per rejected class-`i` request.
    pub reject_costs: Vec<f64>,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MdpConfig {
    /// Two classes, a 7-day horizon and 90 daily slots, with the published
    /// lateness and rejection costs. `d_max` is set to `λ + 6√λ`, rounded up.
    pub fn reference_instance() -> Self {
        Self {
            classes: 2,
            horizon: 7,
            capacity: 90,
            d_max: vec![84, 101],
            arrival_rates: vec![44.0, 56.0],
            late_costs: vec![
                vec![0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
                vec![0.0, 1.0, 3.0, 0.0, 1.0, 2.0, 3.0],
            ],
            reject_costs: vec![5.0, 10.0],
            discount: 0.95,
            seed: 0,
        }
    }

    /// A value-iteration-sized version of [`reference_instance`](Self::reference_instance):
    /// `I=2, H=2, G=2, D=2`, the first two lateness columns, and arrival
    /// rates scaled by `2/90` so demand relative to capacity is unchanged.
    pub fn toy_instance() -> Self {
        Self {
            classes: 2,
            horizon: 2,
            capacity: 2,
            d_max: vec![2, 2],
            arrival_rates: vec![44.0 * 2.0 / 90.0, 56.0 * 2.0 / 90.0],
            late_costs: vec![vec![0.0, 0.5], vec![0.0, 1.0]],
            reject_costs: vec![5.0, 10.0],
            discount: 0.95,
            seed: 0,
        }
    }

    /// Checks dimensions and ranges. Returns warnings for rows of lateness
    /// costs that decrease with the booking offset.
    pub fn validate(&self) -> Result<Vec<String>> {
        let (i, h) = (self.classes, self.horizon);
        if i == 0 || h == 0 {
            return Err(Error::arg("classes and horizon must be at least 1"));
        }
        let dims = [
            ("d_max", self.d_max.len()),
            ("arrival_rates", self.arrival_rates.len()),
            ("reject_costs", self.reject_costs.len()),
            ("late_costs", self.late_costs.len()),
        ];
        for (name, len) in dims {
            if len != i {
                return Err(Error::arg(format!("{name} has {len} entries, expected {i}")));
            }
        }
        if let Some(row) = self.late_costs.iter().find(|r| r.len() != h) {
            return Err(Error::arg(format!("late_costs row has {} entries, expected {h}", row.len())));
        }
        let all_costs = self.late_costs.iter().flatten().chain(&self.reject_costs);
        if all_costs.clone().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::arg("costs must be finite and non-negative"));
        }
        if self.arrival_rates.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::arg("arrival rates must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::arg(format!("discount {} not in [0, 1)", self.discount)));
        }
        let mut warnings = Vec::new();
        for (c, row) in self.late_costs.iter().enumerate() {
            if let Some(h) = row.windows(2).position(|w| w[1] < w[0]) {
                let msg = format!(
                    "late_costs for class {} decrease from day {} to day {} ({} -> {})",
                    c + 1,
                    h + 1,
                    h + 2,
                    row[h],
                    row[h + 1]
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        Ok(warnings)
    }

    /// Class indices from highest to lowest priority: larger rejection cost
    /// first, ties broken toward the larger index.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.classes).collect();
        order.sort_by(|&a, &b| {
            self.reject_costs[b]
                .total_cmp(&self.reject_costs[a])
                .then(b.cmp(&a))
        });
        order
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MdpState {
    /// Requests waiting per class.
    pub x: Vec<u32>,
    /// Free slots per day offset.
    pub y: Vec<u32>,
}

impl MdpState {
    /// No requests and an empty calendar.
    pub fn initial(config: &MdpConfig) -> Self {
        Self {
            x: vec![0; config.classes],
            y: vec![config.capacity; config.horizon],
        }
    }

    /// Bounds `x_i <= D_i`, `y_h <= G` and `y_H = G`.
    pub fn validate(&self, config: &MdpConfig) -> Result<()> {
        if self.x.len() != config.classes || self.y.len() != config.horizon {
            return Err(Error::arg("state dimensions do not match the model"));
        }
        if let Some(i) = (0..config.classes).find(|&i| self.x[i] > config.d_max[i]) {
            return Err(Error::arg(format!(
                "x[{i}] = {} exceeds d_max {}",
                self.x[i], config.d_max[i]
            )));
        }
        if self.y.iter().any(|&v| v > config.capacity) {
            return Err(Error::arg("free slots exceed daily capacity"));
        }
        if self.y.last() != Some(&config.capacity) {
            return Err(Error::arg("last day of the horizon must have full capacity"));
        }
        Ok(())
    }

    /// Whether free capacity is non-decreasing in the day offset.
    pub fn is_ordered(&self) -> bool {
        self.y.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Appointments booked per class (rows) and day offset (columns).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionMatrix {
    classes: usize,
    horizon: usize,
    a: Vec<u32>,
}

impl ActionMatrix {
    pub fn zeros(classes: usize, horizon: usize) -> Self {
        Self {
            classes,
            horizon,
            a: vec![0; classes * horizon],
        }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let classes = rows.len();
        let horizon = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == horizon), "ragged action rows");
        Self {
            classes,
            horizon,
            a: rows.concat(),
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn get(&self, class: usize, offset: usize) -> u32 {
        self.a[class * self.horizon + offset]
    }

    #[inline]
    pub fn set(&mut self, class: usize, offset: usize, v: u32) {
        self.a[class * self.horizon + offset] = v;
    }

    pub fn row_sum(&self, class: usize) -> u32 {
        self.a[class * self.horizon..(class + 1) * self.horizon].iter().sum()
    }

    pub fn col_sum(&self, offset: usize) -> u32 {
        (0..self.classes).map(|i| self.get(i, offset)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.a.chunks(self.horizon.max(1)).map(<[u32]>::to_vec).collect()
    }

    /// Booking limits: per-day bookings within free slots, per-class
    /// bookings within requests.
    pub fn check_feasible(&self, state: &MdpState) -> Result<()> {
        if self.classes != state.x.len() || self.horizon != state.y.len() {
            return Err(Error::arg("action dimensions do not match the state"));
        }
        for h in 0..self.horizon {
            if self.col_sum(h) > state.y[h] {
                return Err(Error::arg(format!(
                    "{} bookings on day {} exceed {} free slots",
                    self.col_sum(h),
                    h + 1,
                    state.y[h]
                )));
            }
        }
        for i in 0..self.classes {
            if self.row_sum(i) > state.x[i] {
                return Err(Error::arg(format!(
                    "{} bookings for class {} exceed {} requests",
                    self.row_sum(i),
                    i + 1,
                    state.x[i]
                )));
            }
        }
        Ok(())
    }
}
