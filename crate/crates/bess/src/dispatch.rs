//! Per-string horizon optimization.
//!
//! The solver is dynamic programming over a discretized SOC grid with a
//! discretized power action set. Stage costs are the market cost of the AC
//! energy plus, when active, a per-FEC price that carries either the cyclic
//! aging cost (fixed-point iteration) or a Lagrangian throughput penalty
//! enforcing the FEC cap (bisection on the multiplier).
//!
//! The optimizer-side model deliberately simplifies the plant: constant
//! inverter efficiency, static believed resistance, believed SOH. The digital
//! twin is the authority on what actually happens.

use serde::{Deserialize, Serialize};

use crate::aging::{cycle_stats, cyclic_loss, cyclic_stress};
use crate::core::{CellModelParams, PriceSeries, StringState, TimeGrid};
use crate::ecm::{current_from_dc_power, ocv, terminal_voltage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveMode {
    /// Pure intraday arbitrage, optionally under a hard FEC cap.
    MarketOnly,
    /// Arbitrage plus the cyclic aging cost in the objective; no FEC cap.
    MarketPlusAging,
}

/// One string's horizon problem as the optimizer sees it.
#[derive(Debug, Clone)]
pub struct HorizonProblem {
    pub grid: TimeGrid,
    pub prices: PriceSeries,
    pub believed: StringState,
    pub params: CellModelParams,
    pub objective_mode: ObjectiveMode,
    /// EUR per kWh of lost capacity (aging-aware modes).
    pub c_aging: f64,
    /// Hard FEC budget over this horizon, market-only mode.
    pub fec_cap: Option<f64>,
}

/// Solver tuning knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub soc_nodes: usize,
    pub power_levels: usize,
    /// Relative optimality gap target against the reference method.
    pub gap: f64,
    /// Fixed-point iterations for the horizon-coupled cyclic cost.
    pub max_price_iters: usize,
    /// Bisection iterations for the FEC-cap multiplier.
    pub cap_bisect_iters: usize,
    /// Restrict the action set to exactly these AC power levels (oracle
    /// comparisons); also disables the boundary-landing helper actions.
    #[serde(skip)]
    pub explicit_levels: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            soc_nodes: 201,
            power_levels: 41,
            gap: 0.01,
            max_price_iters: 6,
            cap_bisect_iters: 24,
            explicit_levels: None,
        }
    }
}

/// A solved horizon schedule with the optimizer's own predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSchedule {
    /// Signed AC setpoints, + = charge.
    pub p_ac: Vec<f64>,
    /// Predicted SOC after each step.
    pub predicted_soc: Vec<f64>,
    /// Predicted Eq-style objective over the horizon in EUR (market cost plus
    /// aging cost when active; terminal valuation excluded).
    pub predicted_cost: f64,
    /// Predicted cyclic capacity loss over the horizon.
    pub predicted_dq_cyc: f64,
    /// Predicted FEC over the horizon.
    pub predicted_dfec: f64,
}

/// Cyclic capacity loss priced in euros: `dq * c_aging * q_nom / (1 - eol)`.
pub fn aging_cost(dq_cyc: f64, c_aging: f64, q_nom: f64, eol: f64) -> Result<f64> {
    if eol >= 1.0 {
        return Err(Error::Domain(format!("eol {eol} must be below 1")));
    }
    if dq_cyc < 0.0 || c_aging < 0.0 || q_nom < 0.0 {
        return Err(Error::Domain("aging cost inputs must be nonnegative".into()));
    }
    Ok(dq_cyc * c_aging * q_nom / (1.0 - eol))
}

/// Builds and validates a horizon problem around the optimizer-side model.
pub fn assemble_problem(
    believed: StringState,
    prices: PriceSeries,
    objective_mode: ObjectiveMode,
    params: CellModelParams,
    c_aging: f64,
    fec_cap: Option<f64>,
) -> Result<HorizonProblem> {
    params.validate()?;
    believed.validate()?;
    if believed.soh() <= params.eol {
        return Err(Error::Expired(format!(
            "believed SOH {:.4} at or below end of life {}",
            believed.soh(),
            params.eol
        )));
    }
    if fec_cap.is_some() && objective_mode != ObjectiveMode::MarketOnly {
        return Err(Error::Config(
            "FEC cap only applies to the market-only objective".into(),
        ));
    }
    let grid = prices.grid;
    Ok(HorizonProblem { grid, prices, believed, params, objective_mode, c_aging, fec_cap })
}

/// The optimizer's simplified plant model, precomputed from a problem.
pub struct OptModel {
    pub r: f64,
    pub eta: f64,
    pub q_as_eff: f64,
    pub dt_s: f64,
    pub params: CellModelParams,
}

impl OptModel {
    pub fn new(problem: &HorizonProblem) -> Self {
        let p = &problem.params;
        OptModel {
            r: p.r0 * problem.believed.r_incr,
            eta: p.eta_inv,
            q_as_eff: p.charge_capacity_as() * problem.believed.soh(),
            dt_s: problem.grid.dt_s as f64,
            params: p.clone(),
        }
    }

    /// One model step: AC setpoint to (next_soc, current). `None` when the
    /// action violates any optimizer-side constraint at this SOC.
    pub fn step(&self, soc: f64, p_ac: f64) -> Option<(f64, f64)> {
        let p = &self.params;
        if p_ac == 0.0 {
            return Some((soc, 0.0));
        }
        if p_ac.abs() > p.p_max * (1.0 + 1e-9) {
            return None;
        }
        let p_dc_w = 1000.0 * if p_ac > 0.0 { p_ac * self.eta } else { p_ac / self.eta };
        let ocv_v = ocv(soc.clamp(0.0, 1.0), &p.ocv_curve).ok()?;
        let i = current_from_dc_power(ocv_v, self.r, p_dc_w).ok()?;
        if i.abs() > p.i_max * (1.0 + 1e-9) {
            return None;
        }
        let v = terminal_voltage(ocv_v, self.r, i);
        if v < p.v_min - 1e-9 || v > p.v_max + 1e-9 {
            return None;
        }
        let next = soc + i * self.dt_s / self.q_as_eff;
        if next < p.soc_min - 1e-12 || next > p.soc_max + 1e-12 {
            return None;
        }
        Some((next.clamp(p.soc_min, p.soc_max), i))
    }

    /// AC power that lands exactly on `target` SOC from `soc`, if reachable
    /// within rated power this step.
    fn landing_power(&self, soc: f64, target: f64) -> Option<f64> {
        let p = &self.params;
        let i = (target - soc) * self.q_as_eff / self.dt_s;
        if i == 0.0 || i.abs() > p.i_max {
            return None;
        }
        let ocv_v = ocv(soc.clamp(0.0, 1.0), &p.ocv_curve).ok()?;
        let v = terminal_voltage(ocv_v, self.r, i);
        if v < p.v_min || v > p.v_max {
            return None;
        }
        let p_dc = v * i / 1000.0;
        let p_ac = if p_dc > 0.0 { p_dc / self.eta } else { p_dc * self.eta };
        if p_ac.abs() > p.p_max {
            return None;
        }
        Some(p_ac)
    }
}

/// Exact evaluation of a power plan through the optimizer-side model.
#[derive(Debug, Clone)]
pub struct PlanEval {
    pub market_cost: f64,
    pub aging_cost: f64,
    pub dq_cyc: f64,
    pub dfec: f64,
    pub terminal_credit: f64,
    /// Selection objective: market + aging - terminal credit.
    pub total: f64,
    /// FEC-weighted mean cycle depth of the plan.
    pub doc: f64,
    pub soc_traj: Vec<f64>,
}

fn mean_price(prices: &PriceSeries) -> f64 {
    prices.prices.iter().sum::<f64>() / prices.prices.len() as f64
}

fn terminal_credit(problem: &HorizonProblem, soc_end: f64) -> f64 {
    // value leftover stored energy at the horizon's mean price through the
    // discharge efficiency; prevents the end-of-horizon dump artifact. The
    // charge-to-energy conversion integrates the OCV curve so that, at a flat
    // price, moving energy out (or in) is never better than holding it.
    let p = &problem.params;
    let span = (soc_end - p.soc_min).max(0.0);
    if span == 0.0 {
        return 0.0;
    }
    let n = 32;
    let mut acc = 0.0;
    for k in 0..=n {
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        let s = p.soc_min + span * k as f64 / n as f64;
        acc += w * ocv(s, &p.ocv_curve).expect("soc within curve domain");
    }
    let mean_v = acc / n as f64;
    let q_as_eff = p.charge_capacity_as() * problem.believed.soh();
    let energy_kwh = span * q_as_eff * mean_v / 3.6e6;
    energy_kwh * mean_price(&problem.prices) / 1000.0 * p.eta_inv
}

/// Simulates `powers` through the optimizer model and prices the result.
/// Errors if any step is infeasible for the model.
pub fn evaluate_plan(problem: &HorizonProblem, model: &OptModel, powers: &[f64]) -> Result<PlanEval> {
    if powers.len() != problem.grid.n_steps {
        return Err(Error::Domain(format!(
            "plan has {} setpoints for a {}-step horizon",
            powers.len(),
            problem.grid.n_steps
        )));
    }
    let dt_h = problem.grid.dt_hours();
    let mut soc = problem.believed.soc;
    let mut soc_traj = Vec::with_capacity(powers.len() + 1);
    let mut currents = Vec::with_capacity(powers.len());
    soc_traj.push(soc);
    let mut market_cost = 0.0;
    for (k, &p_ac) in powers.iter().enumerate() {
        let (next, i) = model.step(soc, p_ac).ok_or_else(|| {
            Error::Domain(format!("plan step {k} infeasible: p_ac {p_ac} at soc {soc}"))
        })?;
        market_cost += p_ac * problem.prices.prices[k] * dt_h / 1000.0;
        soc = next;
        soc_traj.push(soc);
        currents.push(i);
    }
    let stats = cycle_stats(&soc_traj, &currents, &problem.grid, 0.01 * problem.params.i_max)?;
    let dq_cyc = cyclic_loss(&stats, problem.believed.q_loss_cyc, &problem.params)?;
    let c_ag = match problem.objective_mode {
        ObjectiveMode::MarketOnly => 0.0,
        ObjectiveMode::MarketPlusAging => {
            aging_cost(dq_cyc, problem.c_aging, problem.params.q_nom, problem.params.eol)?
        }
    };
    let credit = terminal_credit(problem, soc);
    Ok(PlanEval {
        market_cost,
        aging_cost: c_ag,
        dq_cyc,
        dfec: stats.delta_fec,
        terminal_credit: credit,
        total: market_cost + c_ag - credit,
        doc: stats.doc,
        soc_traj,
    })
}

/// Tiny stage penalty on |p_ac| so value-neutral ties (flat prices, terminal
/// credit vs. spot) resolve to idle instead of riding interpolation noise.
/// The final polish pass re-optimizes against the unregularized objective.
const REG_EUR_PER_KW: f64 = 1e-5;

/// Per-step throughput pricing inside the DP stage cost.
#[derive(Clone, Copy)]
enum FecPenalty {
    Zero,
    /// Flat Lagrangian price per FEC (cap enforcement).
    PerFec(f64),
    /// Marginal cyclic-aging price: the sqrt-law derivative at the believed
    /// accumulated loss, with the stress evaluated at the step's own C-rate
    /// and an estimated horizon DOC.
    Marginal { doc: f64, q_acc: f64, scale: f64 },
}

impl FecPenalty {
    fn cost(&self, dfec: f64, dsoc_abs: f64, dt_h: f64, params: &CellModelParams) -> f64 {
        match *self {
            FecPenalty::Zero => 0.0,
            FecPenalty::PerFec(lambda) => lambda * dfec,
            FecPenalty::Marginal { doc, q_acc, scale } => {
                let sigma = cyclic_stress(dsoc_abs / dt_h, doc, params);
                sigma * sigma / (2.0 * q_acc) * dfec * scale
            }
        }
    }
}

/// Candidate action from one SOC node.
#[derive(Clone, Copy)]
struct Transition {
    p_ac: f64,
    next_soc: f64,
    /// EUR per (EUR/MWh) of price: p_ac * dt / 1000.
    energy_coeff: f64,
    dfec: f64,
}

fn base_levels(cfg: &SolverConfig, p_max: f64) -> Vec<f64> {
    if let Some(levels) = &cfg.explicit_levels {
        return levels.clone();
    }
    let n = cfg.power_levels.max(3);
    let n = if n % 2 == 0 { n + 1 } else { n }; // keep zero in the set
    (0..n).map(|k| -p_max + 2.0 * p_max * k as f64 / (n - 1) as f64).collect()
}

/// Feasible transitions from `soc`, sorted by |p_ac| so that ties resolve
/// toward the smaller setpoint.
fn transitions_from(
    model: &OptModel,
    levels: &[f64],
    soc: f64,
    dt_h: f64,
    with_boundary: bool,
) -> Vec<Transition> {
    let mut out: Vec<Transition> = Vec::with_capacity(levels.len() + 2);
    let mut push = |p_ac: f64| {
        if let Some((next, _i)) = model.step(soc, p_ac) {
            out.push(Transition {
                p_ac,
                next_soc: next,
                energy_coeff: p_ac * dt_h / 1000.0,
                dfec: (next - soc).abs() / 2.0,
            });
        }
    };
    for &p in levels {
        push(p);
    }
    if with_boundary {
        for target in [model.params.soc_min, model.params.soc_max] {
            if let Some(p_ac) = model.landing_power(soc, target) {
                push(p_ac);
            }
        }
    }
    out.sort_by(|a, b| a.p_ac.abs().partial_cmp(&b.p_ac.abs()).unwrap());
    out
}

/// Backward-induction DP with a throughput stage penalty; returns the
/// rolled-out power plan from the believed start SOC.
fn dp_solve(problem: &HorizonProblem, model: &OptModel, cfg: &SolverConfig, penalty: FecPenalty) -> Vec<f64> {
    let p = &problem.params;
    let n = problem.grid.n_steps;
    let dt_h = problem.grid.dt_hours();
    let m = cfg.soc_nodes.max(2);
    let delta = (p.soc_max - p.soc_min) / (m - 1) as f64;
    let nodes: Vec<f64> = (0..m).map(|j| p.soc_min + delta * j as f64).collect();
    let with_boundary = cfg.explicit_levels.is_none();
    let levels = base_levels(cfg, p.p_max);

    // transitions are time-invariant; precompute once per node
    let node_trans: Vec<Vec<Transition>> = nodes
        .iter()
        .map(|&s| transitions_from(model, &levels, s, dt_h, with_boundary))
        .collect();

    let interp = |values: &[f64], soc: f64| -> f64 {
        let x = ((soc - p.soc_min) / delta).clamp(0.0, (m - 1) as f64);
        let j = (x.floor() as usize).min(m - 2);
        let frac = x - j as f64;
        values[j] * (1.0 - frac) + values[j + 1] * frac
    };

    // terminal value: credit leftover stored energy
    let mut value: Vec<f64> = nodes.iter().map(|&s| -terminal_credit(problem, s)).collect();
    let mut stage_values: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    stage_values.push(value.clone());
    for t in (0..n).rev() {
        let price = problem.prices.prices[t];
        let mut next_value = vec![f64::INFINITY; m];
        for (j, trans) in node_trans.iter().enumerate() {
            let mut best = f64::INFINITY;
            for tr in trans {
                let cost = tr.energy_coeff * price
                    + penalty.cost(tr.dfec, 2.0 * tr.dfec, dt_h, p)
                    + REG_EUR_PER_KW * tr.p_ac.abs()
                    + interp(&value, tr.next_soc);
                if cost < best - 1e-12 {
                    best = cost;
                }
            }
            next_value[j] = best;
        }
        value = next_value;
        stage_values.push(value.clone());
    }
    stage_values.reverse(); // stage_values[t] = cost-to-go entering stage t

    // forward rollout from the exact (continuous) start SOC
    let mut soc = problem.believed.soc.clamp(p.soc_min, p.soc_max);
    let mut plan = Vec::with_capacity(n);
    for t in 0..n {
        let price = problem.prices.prices[t];
        let trans = transitions_from(model, &levels, soc, dt_h, with_boundary);
        let mut best_cost = f64::INFINITY;
        let mut best: Option<Transition> = None;
        for tr in &trans {
            let cost = tr.energy_coeff * price
                + penalty.cost(tr.dfec, 2.0 * tr.dfec, dt_h, p)
                + REG_EUR_PER_KW * tr.p_ac.abs()
                + interp(&stage_values[t + 1], tr.next_soc);
            if cost < best_cost - 1e-12 {
                best_cost = cost;
                best = Some(*tr);
            }
        }
        let tr = best.expect("zero power is always feasible");
        plan.push(tr.p_ac);
        soc = tr.next_soc;
    }
    plan
}

/// Coordinate-descent refinement of a plan against the exact objective.
///
/// The DP works on a regularized, penalty-linearized stage cost; this pass
/// removes the residual gap by greedily swapping single setpoints (and, for
/// tiny instances, pairs) whenever the true evaluated objective improves and
/// the FEC cap stays satisfied.
fn polish_plan(
    problem: &HorizonProblem,
    model: &OptModel,
    actions: &[f64],
    mut plan: Vec<f64>,
) -> Vec<f64> {
    let cap = problem.fec_cap;
    let feasible = |ev: &PlanEval| cap.map_or(true, |c| ev.dfec <= c + 1e-9);
    let mut best_total = match evaluate_plan(problem, model, &plan) {
        Ok(ev) if feasible(&ev) => ev.total,
        _ => return plan,
    };
    let n = plan.len();
    let pairwise = n <= 8 && actions.len() <= 9;
    for _sweep in 0..3 {
        let mut improved = false;
        for t in 0..n {
            let old = plan[t];
            for &a in actions {
                if a == old {
                    continue;
                }
                plan[t] = a;
                match evaluate_plan(problem, model, &plan) {
                    Ok(ev) if feasible(&ev) && ev.total < best_total - 1e-9 => {
                        best_total = ev.total;
                        improved = true;
                        break;
                    }
                    _ => plan[t] = old,
                }
            }
        }
        if pairwise {
            for t1 in 0..n {
                for t2 in t1 + 1..n {
                    let (o1, o2) = (plan[t1], plan[t2]);
                    'pair: for &a1 in actions {
                        for &a2 in actions {
                            if a1 == o1 && a2 == o2 {
                                continue;
                            }
                            plan[t1] = a1;
                            plan[t2] = a2;
                            match evaluate_plan(problem, model, &plan) {
                                Ok(ev) if feasible(&ev) && ev.total < best_total - 1e-9 => {
                                    best_total = ev.total;
                                    improved = true;
                                    break 'pair;
                                }
                                _ => {
                                    plan[t1] = o1;
                                    plan[t2] = o2;
                                }
                            }
                        }
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    plan
}

fn schedule_from_plan(problem: &HorizonProblem, model: &OptModel, plan: Vec<f64>) -> Result<DispatchSchedule> {
    let eval = evaluate_plan(problem, model, &plan)?;
    Ok(DispatchSchedule {
        predicted_soc: eval.soc_traj[1..].to_vec(),
        predicted_cost: eval.market_cost + eval.aging_cost,
        predicted_dq_cyc: eval.dq_cyc,
        predicted_dfec: eval.dfec,
        p_ac: plan,
    })
}

/// Solves the horizon problem with the reference DP method.
///
/// Market-only mode enforces the FEC cap by bisecting a Lagrangian throughput
/// price; the aging-aware mode recovers the horizon-coupled cyclic cost by a
/// fixed point on a marginal per-FEC price, keeping the best iterate.
pub fn solve_horizon(problem: &HorizonProblem, cfg: &SolverConfig) -> Result<DispatchSchedule> {
    let model = OptModel::new(problem);
    let actions = base_levels(cfg, problem.params.p_max);
    let plan = match problem.objective_mode {
        ObjectiveMode::MarketOnly => {
            let plan = dp_solve(problem, &model, cfg, FecPenalty::Zero);
            let eval = evaluate_plan(problem, &model, &plan)?;
            match problem.fec_cap {
                None => plan,
                Some(cap) if eval.dfec <= cap + 1e-9 => plan,
                Some(cap) => {
                    // bisection on the throughput multiplier
                    let mut lo = 0.0;
                    let mut hi = 1.0;
                    let mut best: Option<(Vec<f64>, f64)> = None; // (plan, total)
                    for _ in 0..40 {
                        let plan = dp_solve(problem, &model, cfg, FecPenalty::PerFec(hi));
                        let ev = evaluate_plan(problem, &model, &plan)?;
                        if ev.dfec <= cap + 1e-9 {
                            best = Some((plan, ev.total));
                            break;
                        }
                        lo = hi;
                        hi *= 2.0;
                    }
                    if best.is_some() {
                        for _ in 0..cfg.cap_bisect_iters {
                            let mid = 0.5 * (lo + hi);
                            let plan = dp_solve(problem, &model, cfg, FecPenalty::PerFec(mid));
                            let ev = evaluate_plan(problem, &model, &plan)?;
                            if ev.dfec <= cap + 1e-9 {
                                hi = mid;
                                if best.as_ref().map_or(true, |(_, t)| ev.total < *t) {
                                    best = Some((plan, ev.total));
                                }
                            } else {
                                lo = mid;
                            }
                        }
                    }
                    match best {
                        Some((plan, _)) => plan,
                        // unbounded multiplier failed to enforce the cap
                        None => vec![0.0; problem.grid.n_steps],
                    }
                }
            }
        }
        ObjectiveMode::MarketPlusAging => {
            let p = &problem.params;
            let q_acc = problem.believed.q_loss_cyc.max(p.q_floor);
            let scale = problem.c_aging * p.q_nom / (1.0 - p.eol);
            // idle plan is always a valid fallback
            let idle = vec![0.0; problem.grid.n_steps];
            let idle_total = evaluate_plan(problem, &model, &idle)?.total;
            let mut best: (Vec<f64>, f64) = (idle, idle_total);
            // fixed point on the estimated horizon DOC: the first pass prices
            // aging as if cycles were shallow, later passes converge onto the
            // plan's own cycle depth
            let mut doc_est = 0.1;
            for _ in 0..cfg.max_price_iters {
                let penalty = FecPenalty::Marginal { doc: doc_est, q_acc, scale };
                let plan = dp_solve(problem, &model, cfg, penalty);
                let ev = evaluate_plan(problem, &model, &plan)?;
                if ev.total < best.1 - 1e-12 {
                    best = (plan, ev.total);
                }
                if ev.dfec < 1e-9 {
                    break;
                }
                let doc_new = 0.5 * (doc_est + ev.doc.clamp(crate::aging::DOC_REF_MIN, 1.0));
                if (doc_new - doc_est).abs() < 1e-3 {
                    break;
                }
                doc_est = doc_new;
            }
            best.0
        }
    };
    let plan = polish_plan(problem, &model, &actions, plan);
    schedule_from_plan(problem, &model, plan)
}

/// Exhaustive search over every power-level sequence; the verification oracle.
///
/// Bounded to `n_steps <= 8` and `levels <= 5`. Honors the FEC cap as a hard
/// constraint and prices the horizon-coupled cyclic cost exactly.
pub fn enumerate_optimal(problem: &HorizonProblem, levels: usize) -> Result<DispatchSchedule> {
    let n = problem.grid.n_steps;
    if n > 8 || levels > 5 || levels < 2 {
        return Err(Error::OracleScope(format!(
            "instance too large for exhaustive search: {n} steps, {levels} levels"
        )));
    }
    let model = OptModel::new(problem);
    let p_max = problem.params.p_max;
    let mut actions: Vec<f64> = (0..levels)
        .map(|k| -p_max + 2.0 * p_max * k as f64 / (levels - 1) as f64)
        .collect();
    actions.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut plan = vec![0.0; n];
    search(problem, &model, &actions, 0, &mut plan, &mut best)?;
    let (plan, _) = best.ok_or_else(|| Error::Internal("no feasible sequence found".into()))?;
    let eval = evaluate_plan(problem, &model, &plan)?;
    Ok(DispatchSchedule {
        predicted_soc: eval.soc_traj[1..].to_vec(),
        predicted_cost: eval.market_cost + eval.aging_cost,
        predicted_dq_cyc: eval.dq_cyc,
        predicted_dfec: eval.dfec,
        p_ac: plan,
    })
}

fn search(
    problem: &HorizonProblem,
    model: &OptModel,
    actions: &[f64],
    depth: usize,
    plan: &mut Vec<f64>,
    best: &mut Option<(Vec<f64>, f64)>,
) -> Result<()> {
    if depth == problem.grid.n_steps {
        let eval = match evaluate_plan(problem, model, plan) {
            Ok(e) => e,
            Err(_) => return Ok(()),
        };
        if let Some(cap) = problem.fec_cap {
            if eval.dfec > cap + 1e-9 {
                return Ok(());
            }
        }
        if best.as_ref().map_or(true, |(_, t)| eval.total < *t - 1e-12) {
            *best = Some((plan.clone(), eval.total));
        }
        return Ok(());
    }
    // prune sequences that are already infeasible up to this depth
    let mut soc = problem.believed.soc;
    for &p in plan[..depth].iter() {
        match model.step(soc, p) {
            Some((next, _)) => soc = next,
            None => return Ok(()),
        }
    }
    for &a in actions {
        if model.step(soc, a).is_none() {
            continue;
        }
        plan[depth] = a;
        search(problem, model, actions, depth + 1, plan, best)?;
    }
    plan[depth] = 0.0;
    Ok(())
}
