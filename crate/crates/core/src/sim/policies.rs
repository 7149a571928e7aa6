use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fluid::BenchmarkPolicy;
use crate::mdp::{ActionMatrix, MdpConfig, MdpState, ValueTable};

/// Decides one day's bookings from the end-of-day state. The returned
/// matrix must be feasible for `state`.
pub trait BookingPolicy: Send + Sync {
    fn name(&self) -> &str;
    fn decide(&self, state: &MdpState, config: &MdpConfig) -> ActionMatrix;
}

/// Fixed per-class, per-offset quotas with the next-day adjustments.
///
/// Offsets are filled from the earliest, higher-priority classes first, so
/// when tomorrow cannot hold every day-1 quota the lower-priority class is
/// the one cut. Free day-1 slots left after the quotas go to waiting
/// requests of the highest-priority class, provided that class has a
/// day-1 quota to extend; an all-zero table therefore rejects everyone.
#[derive(Debug, Clone)]
pub struct QuotaPolicy {
    name: String,
    policy: BenchmarkPolicy,
}

impl QuotaPolicy {
    pub fn new(name: impl Into<String>, policy: BenchmarkPolicy) -> Self {
        Self {
            name: name.into(),
            policy,
        }
    }

    pub fn quotas(&self) -> &BenchmarkPolicy {
        &self.policy
    }
}

impl BookingPolicy for QuotaPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&self, state: &MdpState, config: &MdpConfig) -> ActionMatrix {
        let order = config.priority_order();
        let mut a = ActionMatrix::zeros(config.classes, config.horizon);
        let mut waiting = state.x.clone();
        let mut free = state.y.clone();
        for h in 0..config.horizon {
            for &i in &order {
                let n = self.policy.quotas[i][h].min(waiting[i]).min(free[h]);
                a.set(i, h, n);
                waiting[i] -= n;
                free[h] -= n;
            }
        }
        if let (Some(&top), Some(first)) = (order.first(), free.first()) {
            if self.policy.quotas[top][0] == 0 {
                return a;
            }
            let extra = waiting[top].min(*first);
            a.set(top, 0, a.get(top, 0) + extra);
        }
        a
    }
}

/// Every request goes to the earliest day with a free slot, higher-priority
/// classes first.
#[derive(Debug, Clone, Copy, Default)]
pub struct EarliestSlot;

impl BookingPolicy for EarliestSlot {
    fn name(&self) -> &str {
        "fcfs"
    }

    fn decide(&self, state: &MdpState, config: &MdpConfig) -> ActionMatrix {
        let mut a = ActionMatrix::zeros(config.classes, config.horizon);
        let mut free = state.y.clone();
        for i in config.priority_order() {
            let mut left = state.x[i];
            for h in 0..config.horizon {
                let n = left.min(free[h]);
                a.set(i, h, n);
                free[h] -= n;
                left -= n;
            }
        }
        a
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RejectAll;

impl BookingPolicy for RejectAll {
    fn name(&self) -> &str {
        "reject_all"
    }

    fn decide(&self, _: &MdpState, config: &MdpConfig) -> ActionMatrix {
        ActionMatrix::zeros(config.classes, config.horizon)
    }
}

/// Looks up the action stored for each state in a solved value table.
#[derive(Debug, Clone)]
pub struct TabularPolicy {
    table: Arc<ValueTable>,
}

impl TabularPolicy {
    pub fn new(table: ValueTable) -> Self {
        Self { table: Arc::new(table) }
    }
}

impl BookingPolicy for TabularPolicy {
    fn name(&self) -> &str {
        "exact"
    }

    fn decide(&self, state: &MdpState, config: &MdpConfig) -> ActionMatrix {
        self.table
            .action(state)
            .cloned()
            .unwrap_or_else(|| ActionMatrix::zeros(config.classes, config.horizon))
    }
}

/// Named booking policies.
#[derive(Clone, Default)]
pub struct PolicyRegistry {
    entries: BTreeMap<String, Arc<dyn BookingPolicy>>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `benchmark` (the given quotas), `fcfs` and `reject_all`.
    pub fn standard(benchmark: &BenchmarkPolicy) -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(QuotaPolicy::new("benchmark", benchmark.clone())));
        r.register(Arc::new(EarliestSlot));
        r.register(Arc::new(RejectAll));
        r
    }

    /// Adds or replaces a policy under its own name.
    pub fn register(&mut self, policy: Arc<dyn BookingPolicy>) {
        self.entries.insert(policy.name().to_string(), policy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn BookingPolicy>> {
        self.entries.get(name).cloned().ok_or_else(|| {
            Error::arg(format!(
                "unknown policy {name:?}; known: {}",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }
}
