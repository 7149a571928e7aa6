use super::{ActionMatrix, MdpConfig, MdpState};
use crate::error::{Error, Result};

/// Refuse to enumerate when the action-count bound exceeds this.
pub const MAX_ACTIONS: f64 = 1e6;

/// Upper bound on the number of feasible actions: the product over classes
/// of the ways to spread at most `x_i` bookings over `H` days, ignoring
/// capacity.
pub fn action_count_bound(state: &MdpState) -> f64 {
    let h = state.y.len() as f64;
    state
        .x
        .iter()
        .map(|&x| {
            // C(x + H, H)
            (1..=state.y.len()).fold(1.0, |acc, j| acc * (x as f64 + j as f64) / j as f64)
        })
        .product::<f64>()
        .max(if h == 0.0 { 1.0 } else { 0.0 })
}

/// Every integer booking matrix within the per-day and per-class limits,
/// each exactly once.
pub fn enumerate_actions(state: &MdpState, config: &MdpConfig) -> Result<Vec<ActionMatrix>> {
    state.validate(config)?;
    let bound = action_count_bound(state);
    if bound > MAX_ACTIONS {
        return Err(Error::Size(format!(
            "up to {bound:.3e} actions in this state; use the fluid solver for instances this large"
        )));
    }
    let mut out = Vec::new();
    let mut current = ActionMatrix::zeros(config.classes, config.horizon);
    let mut row_left = state.x.clone();
    let mut col_left = state.y.clone();
    fill(0, config, &mut current, &mut row_left, &mut col_left, &mut out);
    Ok(out)
}

fn fill(
    cell: usize,
    config: &MdpConfig,
    current: &mut ActionMatrix,
    row_left: &mut [u32],
    col_left: &mut [u32],
    out: &mut Vec<ActionMatrix>,
) {
    if cell == config.classes * config.horizon {
        out.push(current.clone());
        return;
    }
    let (i, h) = (cell / config.horizon, cell % config.horizon);
    let max = row_left[i].min(col_left[h]);
    for v in 0..=max {
        current.set(i, h, v);
        row_left[i] -= v;
        col_left[h] -= v;
        fill(cell + 1, config, current, row_left, col_left, out);
        row_left[i] += v;
        col_left[h] += v;
    }
    current.set(i, h, 0);
}

/// Lateness cost of every booking plus rejection cost of every unbooked request.
pub fn stage_cost(state: &MdpState, action: &ActionMatrix, config: &MdpConfig) -> Result<f64> {
    action.check_feasible(state)?;
    let mut cost = 0.0;
    for i in 0..config.classes {
        for h in 0..config.horizon {
            cost += config.late_costs[i][h] * f64::from(action.get(i, h));
        }
        cost += config.reject_costs[i] * f64::from(state.x[i] - action.row_sum(i));
    }
    Ok(cost)
}

/// Applies bookings, rolls the horizon one day and sets the new requests.
/// Tomorrow's free slots on offset `h` are today's on `h + 1` minus what
/// was just booked there; the new last day opens with full capacity.
pub fn transition(state: &MdpState, action: &ActionMatrix, arrivals: &[u32], config: &MdpConfig) -> Result<MdpState> {
    action.check_feasible(state)?;
    if arrivals.len() != config.classes {
        return Err(Error::arg("arrival vector has wrong length"));
    }
    if let Some(i) = (0..config.classes).find(|&i| arrivals[i] > config.d_max[i]) {
        return Err(Error::arg(format!(
            "{} class-{} arrivals exceed d_max {}",
            arrivals[i],
            i + 1,
            config.d_max[i]
        )));
    }
    let h = config.horizon;
    let mut y = Vec::with_capacity(h);
    for off in 1..h {
        y.push(state.y[off] - action.col_sum(off));
    }
    y.push(config.capacity);
    let next = MdpState {
        x: arrivals.to_vec(),
        y,
    };
    next.validate(config)
        .map_err(|e| Error::Internal(format!("transition produced an invalid state: {e}")))?;
    Ok(next)
}
