//! Rolling-horizon closed loop: optimize over the prediction horizon, execute
//! the control horizon against the digital twin, feed the realized state back.
//!
//! Each string is dispatched independently. The scenario flags control what
//! the optimizer is allowed to know (true aging state vs. assumed-fresh) and
//! whether cyclic aging is priced into its objective.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{CellModelParams, PriceSeries, StringState, TimeGrid};
use crate::dispatch::{assemble_problem, solve_horizon, ObjectiveMode, SolverConfig};
use crate::ecm::InverterModel;
use crate::error::{Error, Result};
use crate::twin::{simulate_window, ClipReason};

/// One of the four operating scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    /// Optimizer sees the true aging state (capacity, resistance, history).
    pub aging_aware: bool,
    /// Cyclic aging cost is part of the optimizer objective.
    pub aging_in_objective: bool,
}

impl Scenario {
    pub fn label(&self) -> &'static str {
        match (self.aging_aware, self.aging_in_objective) {
            (false, false) => "unaware_market",
            (true, false) => "aware_market",
            (false, true) => "unaware_aging_cost",
            (true, true) => "aware_aging_cost",
        }
    }

    /// All four scenarios in a fixed reporting order.
    pub fn all() -> [Scenario; 4] {
        [
            Scenario { aging_aware: false, aging_in_objective: false },
            Scenario { aging_aware: true, aging_in_objective: false },
            Scenario { aging_aware: false, aging_in_objective: true },
            Scenario { aging_aware: true, aging_in_objective: true },
        ]
    }

    fn objective_mode(&self) -> ObjectiveMode {
        if self.aging_in_objective {
            ObjectiveMode::MarketPlusAging
        } else {
            ObjectiveMode::MarketOnly
        }
    }
}

/// Rolling-horizon settings shared by all scenarios of a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineConfig {
    pub prediction_horizon_s: i64,
    pub control_horizon_s: i64,
    /// EUR per kWh of lost capacity.
    pub c_aging: f64,
    /// Daily FEC budget per string; only valid without aging in the objective.
    pub fec_cap_per_day: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            prediction_horizon_s: 12 * 3600,
            control_horizon_s: 4 * 3600,
            c_aging: 200.0,
            fec_cap_per_day: None,
            solver: SolverConfig::default(),
        }
    }
}

/// A physical string entering a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StringSetup {
    pub name: String,
    pub initial: StringState,
    pub inverter: InverterModel,
}

/// One executed timestep of one string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t_s: i64,
    pub price: f64,
    pub planned_p_ac: f64,
    pub realized_p_ac: f64,
    pub planned_soc: f64,
    pub soc: f64,
    pub clip_reason: ClipReason,
}

/// Full trace of one string over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringRunLog {
    pub name: String,
    pub initial: StringState,
    pub final_state: StringState,
    pub steps: Vec<StepLog>,
    /// Set once the string hit end of life and was idled (aware modes only).
    pub retired_at_s: Option<i64>,
}

/// Per-string slice of one optimization window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStringLog {
    pub name: String,
    pub believed_soc: f64,
    pub believed_soh: f64,
    pub fec_cap: Option<f64>,
    pub predicted_cost: f64,
    pub predicted_dfec: f64,
    pub realized_dfec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLog {
    pub start_s: i64,
    pub horizon_steps: usize,
    pub control_steps: usize,
    pub strings: Vec<WindowStringLog>,
}

/// Everything that happened in one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub scenario: Scenario,
    pub grid: TimeGrid,
    pub prices: Vec<f64>,
    pub strings: Vec<StringRunLog>,
    pub windows: Vec<WindowLog>,
}

/// What the optimizer believes about a string under a scenario.
pub fn scenario_view(scenario: Scenario, true_state: &StringState) -> StringState {
    if scenario.aging_aware {
        *true_state
    } else {
        // SOC is measurable; the aging state is assumed fresh
        StringState::fresh(true_state.soc)
    }
}

/// Headroom factor on FEC caps covering the optimizer/twin fidelity gap.
const CAP_MARGIN: f64 = 0.98;

struct FecBudget {
    cap_per_day: f64,
    day: i64,
    consumed: f64,
}

impl FecBudget {
    fn horizon_cap(&mut self, t_rel_s: i64, horizon_s: i64) -> f64 {
        let day = t_rel_s.div_euclid(86_400);
        if day != self.day {
            self.day = day;
            self.consumed = 0.0;
        }
        let prorata = self.cap_per_day * horizon_s as f64 / 86_400.0;
        let remaining = (self.cap_per_day - self.consumed).max(0.0);
        (prorata.min(remaining) * CAP_MARGIN).max(0.0)
    }

    fn charge(&mut self, planned: f64, realized: f64) {
        self.consumed += planned.max(realized);
    }
}

/// Runs one scenario over the price series, returning the full trace.
///
/// `prices` must already sit on the execution grid (resample first).
pub fn run_rolling_horizon(
    scenario: Scenario,
    prices: &PriceSeries,
    setups: &[StringSetup],
    params: &CellModelParams,
    cfg: &EngineConfig,
) -> Result<RunLog> {
    params.validate()?;
    if setups.is_empty() {
        return Err(Error::Config("at least one string is required".into()));
    }
    for s in setups {
        s.initial.validate()?;
        s.inverter.validate()?;
    }
    let grid = prices.grid;
    let dt = grid.dt_s;
    if cfg.prediction_horizon_s <= 0 || cfg.control_horizon_s <= 0 {
        return Err(Error::Config("horizons must be positive".into()));
    }
    if cfg.prediction_horizon_s % dt != 0 || cfg.control_horizon_s % dt != 0 {
        return Err(Error::Config(format!(
            "horizons must be multiples of the {dt} s timestep"
        )));
    }
    if cfg.control_horizon_s > cfg.prediction_horizon_s {
        return Err(Error::Config("control horizon exceeds prediction horizon".into()));
    }
    if cfg.fec_cap_per_day.is_some() && scenario.aging_in_objective {
        return Err(Error::Config(
            "FEC cap and aging cost in the objective are mutually exclusive".into(),
        ));
    }
    if let Some(cap) = cfg.fec_cap_per_day {
        if !(cap > 0.0) {
            return Err(Error::Config(format!("FEC cap {cap} must be positive")));
        }
    }

    let pred_steps = (cfg.prediction_horizon_s / dt) as usize;
    let ctrl_steps = (cfg.control_horizon_s / dt) as usize;

    let mut states: Vec<StringState> = setups.iter().map(|s| s.initial).collect();
    let mut retired: Vec<Option<i64>> = vec![None; setups.len()];
    let mut step_logs: Vec<Vec<StepLog>> = vec![Vec::with_capacity(grid.n_steps); setups.len()];
    let mut budgets: Vec<Option<FecBudget>> = setups
        .iter()
        .map(|_| cfg.fec_cap_per_day.map(|c| FecBudget { cap_per_day: c, day: 0, consumed: 0.0 }))
        .collect();
    let mut windows = Vec::new();

    let mut t = 0usize;
    while t < grid.n_steps {
        let h = pred_steps.min(grid.n_steps - t);
        let c = ctrl_steps.min(grid.n_steps - t);
        let t_s = grid.step_start(t);
        let wgrid = TimeGrid::new(t_s, dt, h)?;
        let horizon_prices = PriceSeries::new(wgrid, prices.prices[t..t + h].to_vec())?;
        let exec_grid = TimeGrid::new(t_s, dt, c)?;

        let mut wlogs = Vec::with_capacity(setups.len());
        for (idx, setup) in setups.iter().enumerate() {
            let believed = scenario_view(scenario, &states[idx]);
            let cap = budgets[idx]
                .as_mut()
                .map(|b| b.horizon_cap(t_s - grid.start_s, wgrid.span_s()));

            // an exhausted budget or a retired string idles this window
            let idle = retired[idx].is_some() || cap.map_or(false, |c| c < 1e-6);
            let solved = if idle {
                None
            } else {
                match assemble_problem(
                    believed,
                    horizon_prices.clone(),
                    scenario.objective_mode(),
                    params.clone(),
                    cfg.c_aging,
                    cap.filter(|&c| c > 0.0),
                ) {
                    Ok(problem) => Some(solve_horizon(&problem, &cfg.solver)?),
                    Err(Error::Expired(_)) => {
                        retired[idx] = Some(t_s);
                        None
                    }
                    Err(e) => return Err(e),
                }
            };

            let (plan, planned_soc, predicted_cost, predicted_dfec) = match &solved {
                Some(s) => (
                    s.p_ac[..c].to_vec(),
                    s.predicted_soc[..c].to_vec(),
                    s.predicted_cost,
                    s.predicted_dfec,
                ),
                None => (vec![0.0; c], vec![believed.soc; c], 0.0, 0.0),
            };

            let window = simulate_window(&states[idx], &plan, params, &setup.inverter, &exec_grid)?;
            let planned_dfec_exec: f64 = {
                let mut prev = believed.soc;
                planned_soc
                    .iter()
                    .map(|&s| {
                        let d = (s - prev).abs() / 2.0;
                        prev = s;
                        d
                    })
                    .sum()
            };
            if let Some(b) = budgets[idx].as_mut() {
                b.charge(planned_dfec_exec, window.dfec);
            }

            for (k, st) in window.steps.iter().enumerate() {
                step_logs[idx].push(StepLog {
                    t_s: exec_grid.step_start(k),
                    price: prices.prices[t + k],
                    planned_p_ac: plan[k],
                    realized_p_ac: st.p_ac_realized,
                    planned_soc: planned_soc[k],
                    soc: st.soc_after,
                    clip_reason: st.clip_reason,
                });
            }
            wlogs.push(WindowStringLog {
                name: setup.name.clone(),
                believed_soc: believed.soc,
                believed_soh: believed.soh(),
                fec_cap: cap,
                predicted_cost,
                predicted_dfec,
                realized_dfec: window.dfec,
            });
            states[idx] = window.state_after;
        }
        windows.push(WindowLog { start_s: t_s, horizon_steps: h, control_steps: c, strings: wlogs });
        t += c;
    }

    let strings = setups
        .iter()
        .enumerate()
        .map(|(idx, setup)| StringRunLog {
            name: setup.name.clone(),
            initial: setup.initial,
            final_state: states[idx],
            steps: std::mem::take(&mut step_logs[idx]),
            retired_at_s: retired[idx],
        })
        .collect();

    Ok(RunLog {
        scenario,
        grid,
        prices: prices.prices.clone(),
        strings,
        windows,
    })
}

/// Runs all four scenarios over the same inputs, in parallel. Output order is
/// the fixed `Scenario::all()` order regardless of thread scheduling.
pub fn run_comparison(
    prices: &PriceSeries,
    setups: &[StringSetup],
    params: &CellModelParams,
    cfg: &EngineConfig,
) -> Result<Vec<RunLog>> {
    Scenario::all()
        .par_iter()
        .map(|&sc| {
            let mut cfg = cfg.clone();
            // the cap only exists for the market-only objective
            if sc.aging_in_objective {
                cfg.fec_cap_per_day = None;
            }
            run_rolling_horizon(sc, prices, setups, params, &cfg)
        })
        .collect()
}

impl RunLog {
    /// Realized FEC of one string per run day, from the logged SOC trace.
    pub fn daily_fec(&self, string_idx: usize) -> Vec<f64> {
        let s = &self.strings[string_idx];
        let mut days: HashMap<i64, f64> = HashMap::new();
        let mut prev = s.initial.soc;
        for st in &s.steps {
            let day = (st.t_s - self.grid.start_s).div_euclid(86_400);
            *days.entry(day).or_insert(0.0) += (st.soc - prev).abs() / 2.0;
            prev = st.soc;
        }
        let mut out: Vec<(i64, f64)> = days.into_iter().collect();
        out.sort_by_key(|&(d, _)| d);
        out.into_iter().map(|(_, f)| f).collect()
    }

    /// Writes the run as CSV traces plus a JSON summary into `dir`.
    ///
    /// Layout: `<label>_<string>_steps.csv`, `<label>_windows.csv`,
    /// `<label>_meta.json`. Output is byte-deterministic.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let label = self.scenario.label();
        for s in &self.strings {
            let mut csv = String::from(
                "t_s,price_eur_mwh,planned_p_ac_kw,realized_p_ac_kw,planned_soc,soc,clip_reason\n",
            );
            for st in &s.steps {
                csv.push_str(&format!(
                    "{},{:.6},{:.6},{:.6},{:.9},{:.9},{}\n",
                    st.t_s,
                    st.price,
                    st.planned_p_ac,
                    st.realized_p_ac,
                    st.planned_soc,
                    st.soc,
                    st.clip_reason.as_str()
                ));
            }
            fs::write(dir.join(format!("{label}_{}_steps.csv", s.name)), csv)?;
        }
        let mut csv = String::from(
            "start_s,string,believed_soc,believed_soh,fec_cap,predicted_cost_eur,predicted_dfec,realized_dfec\n",
        );
        for w in &self.windows {
            for ws in &w.strings {
                csv.push_str(&format!(
                    "{},{},{:.9},{:.9},{},{:.6},{:.9},{:.9}\n",
                    w.start_s,
                    ws.name,
                    ws.believed_soc,
                    ws.believed_soh,
                    ws.fec_cap.map_or(String::new(), |c| format!("{c:.9}")),
                    ws.predicted_cost,
                    ws.predicted_dfec,
                    ws.realized_dfec
                ));
            }
        }
        fs::write(dir.join(format!("{label}_windows.csv")), csv)?;

        #[derive(Serialize)]
        struct Meta<'a> {
            scenario: Scenario,
            grid: TimeGrid,
            strings: Vec<MetaString<'a>>,
        }
        #[derive(Serialize)]
        struct MetaString<'a> {
            name: &'a str,
            initial: StringState,
            final_state: StringState,
            retired_at_s: Option<i64>,
        }
        let meta = Meta {
            scenario: self.scenario,
            grid: self.grid,
            strings: self
                .strings
                .iter()
                .map(|s| MetaString {
                    name: &s.name,
                    initial: s.initial,
                    final_state: s.final_state,
                    retired_at_s: s.retired_at_s,
                })
                .collect(),
        };
        let json = serde_json::to_string_pretty(&meta)
            .map_err(|e| Error::Internal(format!("meta serialization: {e}")))?;
        fs::write(dir.join(format!("{label}_meta.json")), json)?;
        Ok(())
    }
}
