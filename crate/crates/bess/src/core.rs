//! Shared domain types: time grids, price series, cell parameters, string state.
//!
//! Time is integer seconds since the Unix epoch throughout; all grids align to
//! whole multiples of their step so year-long runs accumulate no float drift.

use serde::{Deserialize, Serialize};

use crate::ecm::OcvCurve;
use crate::error::{Error, Result};

/// Uniform time grid: `n_steps` steps of `dt_s` seconds starting at `start_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// UTC start, seconds since epoch.
    pub start_s: i64,
    /// Step duration in seconds, > 0.
    pub dt_s: i64,
    /// Number of steps, >= 1.
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(start_s: i64, dt_s: i64, n_steps: usize) -> Result<Self> {
        if dt_s <= 0 {
            return Err(Error::Config(format!("grid dt must be positive, got {dt_s} s")));
        }
        if n_steps == 0 {
            return Err(Error::Config("grid needs at least one step".into()));
        }
        Ok(TimeGrid { start_s, dt_s, n_steps })
    }

    /// Timestamp of the start of step `k` (valid for `k <= n_steps`).
    pub fn step_start(&self, k: usize) -> i64 {
        self.start_s + self.dt_s * k as i64
    }

    /// Exclusive end of the grid.
    pub fn end_s(&self) -> i64 {
        self.step_start(self.n_steps)
    }

    /// Total span in seconds.
    pub fn span_s(&self) -> i64 {
        self.dt_s * self.n_steps as i64
    }

    /// Step duration in hours.
    pub fn dt_hours(&self) -> f64 {
        self.dt_s as f64 / 3600.0
    }
}

/// Builds a grid covering `span_s` seconds at step `dt_s`.
///
/// `span_s` must be an exact multiple of `dt_s`.
pub fn build_time_grid(start_s: i64, span_s: i64, dt_s: i64) -> Result<TimeGrid> {
    if dt_s <= 0 {
        return Err(Error::Config(format!("grid dt must be positive, got {dt_s} s")));
    }
    if span_s <= 0 || span_s % dt_s != 0 {
        return Err(Error::Config(format!(
            "span {span_s} s is not a positive multiple of dt {dt_s} s"
        )));
    }
    TimeGrid::new(start_s, dt_s, (span_s / dt_s) as usize)
}

/// Intraday prices in EUR/MWh on a uniform grid, one value per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub grid: TimeGrid,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(grid: TimeGrid, prices: Vec<f64>) -> Result<Self> {
        if prices.len() != grid.n_steps {
            return Err(Error::Data(format!(
                "price series has {} values for a {}-step grid",
                prices.len(),
                grid.n_steps
            )));
        }
        if let Some(i) = prices.iter().position(|p| !p.is_finite()) {
            return Err(Error::Data(format!("non-finite price at step {i}")));
        }
        Ok(PriceSeries { grid, prices })
    }

    /// Price in effect at timestamp `t_s` (must fall within the grid span).
    pub fn price_at(&self, t_s: i64) -> Result<f64> {
        if t_s < self.grid.start_s || t_s >= self.grid.end_s() {
            return Err(Error::Data(format!(
                "timestamp {t_s} outside price coverage [{}, {})",
                self.grid.start_s,
                self.grid.end_s()
            )));
        }
        let k = ((t_s - self.grid.start_s) / self.grid.dt_s) as usize;
        Ok(self.prices[k])
    }
}

/// Zero-order-hold resampling: every target step takes the most recent source price.
///
/// The source must cover the full target span.
pub fn resample_zoh(series: &PriceSeries, target: &TimeGrid) -> Result<PriceSeries> {
    let src = &series.grid;
    if target.start_s < src.start_s || target.end_s() > src.end_s() {
        return Err(Error::Data(format!(
            "price coverage gap: source spans [{}, {}) but target needs [{}, {})",
            src.start_s,
            src.end_s(),
            target.start_s,
            target.end_s()
        )));
    }
    let prices = (0..target.n_steps)
        .map(|k| {
            let t = target.step_start(k);
            let i = ((t - src.start_s) / src.dt_s) as usize;
            series.prices[i.min(src.n_steps - 1)]
        })
        .collect();
    PriceSeries::new(*target, prices)
}

/// ECM and aging constants for one battery string, lumped as a single
/// equivalent cell whose OCV spans the full string voltage window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default = "CellModelParams::default_lfp_80kwh", deny_unknown_fields)]
pub struct CellModelParams {
    /// Nominal energy capacity in kWh.
    pub q_nom: f64,
    /// Rated AC power in kW (charge and discharge).
    pub p_max: f64,
    /// Current limit in A.
    pub i_max: f64,
    /// Voltage limits in V.
    pub v_min: f64,
    pub v_max: f64,
    /// Operational SOC window.
    pub soc_min: f64,
    pub soc_max: f64,
    /// Fresh internal resistance in ohms.
    pub r0: f64,
    /// Open-circuit voltage curve over SOC in [0, 1].
    pub ocv_curve: OcvCurve,
    /// Calendar stress fit constants; stress is per sqrt(day).
    pub c1: f64,
    pub d1: f64,
    /// Temperature stress factor, constant at 25 degC.
    pub k_temp: f64,
    /// Cyclic stress fit constants; stress is per sqrt(FEC).
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub d2: f64,
    /// Constant inverter efficiency used by the optimizer model.
    pub eta_inv: f64,
    /// End-of-life SOH threshold.
    pub eol: f64,
    /// Denominator floor for the incremental aging laws (seeds the sqrt law).
    pub q_floor: f64,
    /// Linear resistance-growth coefficient over total capacity loss.
    pub k_r: f64,
}

impl CellModelParams {
    /// Named default parameter set: an 80 kW / 80 kWh LFP-shaped string.
    ///
    /// The aging fit constants are calibration fixtures: they put a
    /// continuously cycled fresh string in the low-single-digit percent
    /// SOH loss per year range at 1-2 FEC/day, and are not traceable to
    /// any specific cell study.
    pub fn default_lfp_80kwh() -> Self {
        CellModelParams {
            q_nom: 80.0,
            p_max: 80.0,
            i_max: 150.0,
            v_min: 605.0,
            v_max: 775.0,
            soc_min: 0.1,
            soc_max: 0.9,
            r0: 0.1,
            ocv_curve: OcvCurve::default_lfp(),
            c1: 6.0e-3,
            d1: 1.17e-3,
            k_temp: 1.0,
            a2: 5.0e-4,
            b2: 1.5e-3,
            c2: 5.0,
            d2: 1.0,
            eta_inv: 0.95,
            eol: 0.8,
            q_floor: 0.02,
            k_r: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.q_nom > 0.0) {
            problems.push("q_nom must be > 0");
        }
        if !(self.p_max > 0.0) {
            problems.push("p_max must be > 0");
        }
        if !(self.i_max > 0.0) {
            problems.push("i_max must be > 0");
        }
        if !(self.r0 > 0.0) {
            problems.push("r0 must be > 0");
        }
        if !(self.v_min < self.v_max) {
            problems.push("v_min must be < v_max");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            problems.push("SOC bounds must satisfy 0 <= soc_min < soc_max <= 1");
        }
        if !(self.eta_inv > 0.0 && self.eta_inv <= 1.0) {
            problems.push("eta_inv must be in (0, 1]");
        }
        if !(self.eol > 0.0 && self.eol < 1.0) {
            problems.push("eol must be in (0, 1)");
        }
        if !(self.q_floor > 0.0) {
            problems.push("q_floor must be > 0");
        }
        if !(self.k_r >= 0.0) {
            problems.push("k_r must be >= 0");
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        self.ocv_curve.validate()
    }

    /// Nominal charge capacity in ampere-seconds, derived from the energy
    /// capacity and the mean OCV so that a full SOC sweep stores `q_nom` kWh.
    pub fn charge_capacity_as(&self) -> f64 {
        self.q_nom * 3.6e6 / self.ocv_curve.mean_voltage()
    }
}

/// One string's condition: SOC plus the aging bookkeeping.
///
/// SOH is always derived as `1 - q_loss_cal - q_loss_cyc`, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StringState {
    /// State of charge, fraction of actual (SOH-scaled) capacity.
    pub soc: f64,
    /// Accumulated relative calendar capacity loss.
    pub q_loss_cal: f64,
    /// Accumulated relative cyclic capacity loss.
    pub q_loss_cyc: f64,
    /// Resistance increase factor, >= 1.
    pub r_incr: f64,
    /// Cumulative full equivalent cycles.
    pub fec_total: f64,
}

impl StringState {
    /// Fresh string at the given SOC.
    pub fn fresh(soc: f64) -> Self {
        StringState { soc, q_loss_cal: 0.0, q_loss_cyc: 0.0, r_incr: 1.0, fec_total: 0.0 }
    }

    pub fn soh(&self) -> f64 {
        1.0 - self.q_loss_cal - self.q_loss_cyc
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.soc) {
            return Err(Error::Domain(format!("soc {} outside [0, 1]", self.soc)));
        }
        if self.q_loss_cal < 0.0 || self.q_loss_cyc < 0.0 {
            return Err(Error::Domain("loss accumulators must be nonnegative".into()));
        }
        if self.soh() <= 0.0 {
            return Err(Error::Expired(format!("soh {} is not positive", self.soh())));
        }
        if self.r_incr < 1.0 {
            return Err(Error::Domain(format!("r_incr {} below 1", self.r_incr)));
        }
        Ok(())
    }
}
