//! Semi-empirical calendar and cyclic degradation, cycle statistics over a
//! horizon, and SOH bookkeeping.
//!
//! Both loss laws are the incremental (differential) form of a sqrt law:
//! integrating `dq = s^2 / (2q) dt` reproduces `q = s * sqrt(t)`. The
//! denominator accumulator is floored at `params.q_floor` so a fresh cell
//! behaves as if seeded that far into the sqrt law.

use serde::{Deserialize, Serialize};

use crate::core::{CellModelParams, StringState, TimeGrid};
use crate::error::{Error, Result};

/// Cycle aggregates over a window, feeding the cyclic stress law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleStats {
    /// Full equivalent cycles over the window.
    pub delta_fec: f64,
    /// FEC-weighted mean depth of cycle.
    pub doc: f64,
    /// Mean absolute C-rate over active steps, in 1/h.
    pub c_rate: f64,
}

impl CycleStats {
    pub fn idle() -> Self {
        CycleStats { delta_fec: 0.0, doc: 0.0, c_rate: 0.0 }
    }
}

/// Calendar stress factor in loss-fraction per sqrt(day).
pub fn calendar_stress(soc: f64, params: &CellModelParams) -> f64 {
    let cubic = params.c1 * (soc - 0.5).powi(3) + params.d1;
    cubic * params.k_temp
}

/// Incremental calendar loss for one timestep at the given SOC.
///
/// `dt_s` is converted to days, the time unit of the fit constants.
pub fn calendar_loss_step(
    soc: f64,
    q_acc_cal: f64,
    dt_s: i64,
    params: &CellModelParams,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::Domain(format!("soc {soc} outside [0, 1]")));
    }
    if dt_s <= 0 {
        return Err(Error::Domain(format!("dt {dt_s} s must be positive")));
    }
    let s = calendar_stress(soc, params);
    let dt_days = dt_s as f64 / 86_400.0;
    Ok(s * s / (2.0 * q_acc_cal.max(params.q_floor)) * dt_days)
}

/// Shallowest depth of cycle the stress fit is evaluated at. The cubic depth
/// term is a fit over moderate-to-deep cycle tests; extrapolated below ~10%
/// depth it collapses toward zero (and eventually negative) stress, which
/// would make near-zero-depth cycling spuriously free. Depths below the floor
/// are charged as if at the floor.
pub const DOC_REF_MIN: f64 = 0.1;

/// Cyclic stress factor in loss-fraction per sqrt(FEC).
pub fn cyclic_stress(c_rate: f64, doc: f64, params: &CellModelParams) -> f64 {
    let doc = doc.max(DOC_REF_MIN);
    (params.a2 * c_rate + params.b2) * (params.c2 * (doc - 0.6).powi(3) + params.d2)
}

/// Incremental cyclic loss over a window with the given cycle statistics.
pub fn cyclic_loss(stats: &CycleStats, q_acc_cyc: f64, params: &CellModelParams) -> Result<f64> {
    if stats.delta_fec < 0.0 || stats.c_rate < 0.0 || !(0.0..=1.0).contains(&stats.doc) {
        return Err(Error::Domain(format!("invalid cycle stats {stats:?}")));
    }
    if stats.delta_fec == 0.0 {
        return Ok(0.0);
    }
    let s = cyclic_stress(stats.c_rate, stats.doc, params);
    Ok(s * s / (2.0 * q_acc_cyc.max(params.q_floor)) * stats.delta_fec)
}

/// Computes cycle statistics from an SOC trajectory.
///
/// `soc_traj` holds `n_steps + 1` points (window start plus one per step);
/// `i_traj` holds the per-step currents and is used only to mask idle steps
/// out of the C-rate mean via `i_active` (typically 1% of the current limit).
///
/// FEC counts SOC throughput: `sum |dsoc| / 2`. DOC is the FEC-weighted mean
/// depth of the half-cycles found by turning-point reduction, which for a
/// single swing reduces to max - min.
pub fn cycle_stats(
    soc_traj: &[f64],
    i_traj: &[f64],
    grid: &TimeGrid,
    i_active: f64,
) -> Result<CycleStats> {
    if soc_traj.len() != grid.n_steps + 1 || i_traj.len() != grid.n_steps {
        return Err(Error::Domain(format!(
            "trajectory length mismatch: {} SOC points, {} currents for {} steps",
            soc_traj.len(),
            i_traj.len(),
            grid.n_steps
        )));
    }
    let delta_fec: f64 = soc_traj.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / 2.0;

    let dt_h = grid.dt_hours();
    let mut rate_sum = 0.0;
    let mut active = 0usize;
    for (k, &i) in i_traj.iter().enumerate() {
        if i.abs() > i_active {
            rate_sum += (soc_traj[k + 1] - soc_traj[k]).abs() / dt_h;
            active += 1;
        }
    }
    let c_rate = if active > 0 { rate_sum / active as f64 } else { 0.0 };

    // turning-point reduction: keep points where the direction changes
    let mut turning: Vec<f64> = Vec::with_capacity(soc_traj.len());
    for &s in soc_traj {
        while turning.len() >= 2 {
            let a = turning[turning.len() - 2];
            let b = turning[turning.len() - 1];
            if (b - a) * (s - b) >= 0.0 {
                turning.pop();
            } else {
                break;
            }
        }
        turning.push(s);
    }
    // half-cycle depths between consecutive turning points, FEC-weighted mean
    let mut depth_sum = 0.0;
    let mut depth_sq_sum = 0.0;
    for w in turning.windows(2) {
        let d = (w[1] - w[0]).abs();
        depth_sum += d;
        depth_sq_sum += d * d;
    }
    let doc = if depth_sum > 0.0 { depth_sq_sum / depth_sum } else { 0.0 };

    Ok(CycleStats { delta_fec, doc, c_rate })
}

/// Applies accrued losses to a string state and updates the resistance factor.
///
/// SOH drops by exactly `dq_cal + dq_cyc`; errors out if that would exhaust it.
pub fn apply_aging(
    state: &StringState,
    dq_cal: f64,
    dq_cyc: f64,
    dfec: f64,
    k_r: f64,
) -> Result<StringState> {
    if dq_cal < 0.0 || dq_cyc < 0.0 || dfec < 0.0 {
        return Err(Error::Domain("aging increments must be nonnegative".into()));
    }
    let mut next = *state;
    next.q_loss_cal += dq_cal;
    next.q_loss_cyc += dq_cyc;
    next.fec_total += dfec;
    if next.soh() <= 0.0 {
        return Err(Error::Expired(format!(
            "accumulated losses {} exhaust the capacity",
            next.q_loss_cal + next.q_loss_cyc
        )));
    }
    next.r_incr = resistance_growth(&next, k_r);
    Ok(next)
}

/// Linear resistance growth over total loss, monotone nondecreasing.
pub fn resistance_growth(state: &StringState, k_r: f64) -> f64 {
    state.r_incr.max(1.0 + k_r * (state.q_loss_cal + state.q_loss_cyc))
}
