//! High-fidelity digital twin: executes AC setpoints against a string's true
//! state, clipping at physical limits and reporting what was actually realized.
//!
//! The twin deliberately differs from the optimizer model: it uses the
//! inverter efficiency curve and the aged resistance, so schedules built on
//! the simplified model can turn out infeasible here.

use serde::{Deserialize, Serialize};

use crate::aging::{apply_aging, calendar_loss_step, cycle_stats, cyclic_loss};
use crate::core::{CellModelParams, StringState, TimeGrid};
use crate::ecm::{
    current_from_dc_power, dc_power, inverter_ac_from_dc, inverter_dc_from_ac, ocv,
    terminal_voltage, InverterModel,
};
use crate::error::{Error, Result};

/// Which physical limit clipped a setpoint, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipReason {
    None,
    Power,
    Current,
    Voltage,
    Soc,
}

impl ClipReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClipReason::None => "none",
            ClipReason::Power => "power",
            ClipReason::Current => "current",
            ClipReason::Voltage => "voltage",
            ClipReason::Soc => "soc",
        }
    }
}

/// Outcome of executing one AC setpoint for one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub p_ac_requested: f64,
    pub p_ac_realized: f64,
    pub soc_after: f64,
    pub v: f64,
    pub i: f64,
    pub clip_reason: ClipReason,
}

/// Outcome of executing a whole window: per-step results plus the aging
/// accrued over the window and the updated string state.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub steps: Vec<StepResult>,
    pub dq_cal: f64,
    pub dq_cyc: f64,
    pub dfec: f64,
    pub state_after: StringState,
}

/// Executes one AC power setpoint against the true string state.
///
/// The requested power is converted to a DC-side current, the current is
/// projected onto the intersection of the power, current, voltage and
/// SOC-reachability limits, and the realized power is mapped back to the AC
/// side. SOH in the SOC update is taken from the passed state (the caller
/// freezes it for the duration of a window).
pub fn execute_step(
    state: &StringState,
    params: &CellModelParams,
    inv: &InverterModel,
    p_ac: f64,
    dt_s: i64,
) -> Result<StepResult> {
    if !p_ac.is_finite() {
        return Err(Error::Setpoint(format!("non-finite setpoint {p_ac}")));
    }
    state.validate()?;

    // power limit first, on the AC side
    let mut clip = ClipReason::None;
    let p_ac_lim = if p_ac.abs() > params.p_max {
        clip = ClipReason::Power;
        p_ac.signum() * params.p_max
    } else {
        p_ac
    };

    let soc = state.soc.clamp(0.0, 1.0);
    let ocv_v = ocv(soc, &params.ocv_curve)?;
    let r = params.r0 * state.r_incr;
    let soh = state.soh();
    let q_as = params.charge_capacity_as() * soh;
    let dt = dt_s as f64;

    let p_dc_w = 1000.0 * inverter_dc_from_ac(p_ac_lim, inv, params.p_max)?;
    let i_req = match current_from_dc_power(ocv_v, r, p_dc_w) {
        Ok(i) => i,
        // requested discharge beyond the cell's maximum power point; start from
        // the max-power current, the voltage limit clips it below anyway
        Err(_) => -ocv_v / (2.0 * r),
    };

    // feasible current interval, each constraint tagged for clip reporting
    let bounds = [
        (params.i_max, ClipReason::Current),
        ((params.v_max - ocv_v) / r, ClipReason::Voltage),
        ((params.soc_max - soc) * q_as / dt, ClipReason::Soc),
    ];
    let lower = [
        (-params.i_max, ClipReason::Current),
        ((params.v_min - ocv_v) / r, ClipReason::Voltage),
        ((params.soc_min - soc) * q_as / dt, ClipReason::Soc),
    ];
    let (mut hi, mut hi_why) = (f64::INFINITY, ClipReason::None);
    for &(b, why) in &bounds {
        if b < hi {
            hi = b;
            hi_why = why;
        }
    }
    let (mut lo, mut lo_why) = (f64::NEG_INFINITY, ClipReason::None);
    for &(b, why) in &lower {
        if b > lo {
            lo = b;
            lo_why = why;
        }
    }

    // project toward zero only: realized power keeps the requested sign
    let i_real = if i_req > 0.0 {
        i_req.min(hi).max(0.0)
    } else if i_req < 0.0 {
        i_req.max(lo).min(0.0)
    } else {
        0.0
    };

    let clipped = (i_real - i_req).abs() > 1e-12 * i_req.abs().max(1.0);
    if clipped && clip == ClipReason::None {
        clip = if i_req > 0.0 { hi_why } else { lo_why };
    }

    let (p_ac_real, v, i) = if clip == ClipReason::None {
        // unclipped: report the request verbatim, no numeric round-trip drift
        (p_ac, terminal_voltage(ocv_v, r, i_real), i_real)
    } else {
        let p_dc_real = dc_power(ocv_v, r, i_real) / 1000.0;
        let p_ac_real = inverter_ac_from_dc(p_dc_real, inv, params.p_max)?;
        (p_ac_real, terminal_voltage(ocv_v, r, i_real), i_real)
    };

    let mut soc_after = soc + i * dt / q_as;
    // guard against sub-1e-9 numeric overshoot at the rails
    if soc_after > params.soc_max && soc_after - params.soc_max < 1e-9 {
        soc_after = params.soc_max;
    }
    if soc_after < params.soc_min && params.soc_min - soc_after < 1e-9 {
        soc_after = params.soc_min;
    }

    Ok(StepResult { p_ac_requested: p_ac, p_ac_realized: p_ac_real, soc_after, v, i, clip_reason: clip })
}

/// Executes a schedule over a window, accruing calendar aging per step and
/// cyclic aging once over the whole window.
pub fn simulate_window(
    state: &StringState,
    schedule: &[f64],
    params: &CellModelParams,
    inv: &InverterModel,
    grid: &TimeGrid,
) -> Result<WindowResult> {
    if schedule.len() != grid.n_steps {
        return Err(Error::Domain(format!(
            "schedule has {} setpoints for a {}-step window",
            schedule.len(),
            grid.n_steps
        )));
    }
    let mut running = *state; // accumulators frozen, only soc advances
    let mut steps = Vec::with_capacity(grid.n_steps);
    let mut soc_traj = Vec::with_capacity(grid.n_steps + 1);
    let mut currents = Vec::with_capacity(grid.n_steps);
    soc_traj.push(running.soc);
    let mut dq_cal = 0.0;
    for &p_ac in schedule {
        let step = execute_step(&running, params, inv, p_ac, grid.dt_s)?;
        dq_cal += calendar_loss_step(running.soc, state.q_loss_cal + dq_cal, grid.dt_s, params)?;
        running.soc = step.soc_after;
        soc_traj.push(step.soc_after);
        currents.push(step.i);
        steps.push(step);
    }
    let stats = cycle_stats(&soc_traj, &currents, grid, 0.01 * params.i_max)?;
    let dq_cyc = cyclic_loss(&stats, state.q_loss_cyc, params)?;
    let state_after = apply_aging(&running, dq_cal, dq_cyc, stats.delta_fec, params.k_r)?;
    Ok(WindowResult { steps, dq_cal, dq_cyc, dfec: stats.delta_fec, state_after })
}
