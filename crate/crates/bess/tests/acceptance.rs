//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS/FAIL line (visible with `--nocapture`) before asserting.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bess::aging::{calendar_loss_step, calendar_stress, cyclic_loss, cyclic_stress, CycleStats};
use bess::cli::{cmd_run, gen_synthetic_prices, RunConfig};
use bess::core::{build_time_grid, resample_zoh, CellModelParams, PriceSeries, StringState, TimeGrid};
use bess::dispatch::{
    assemble_problem, enumerate_optimal, evaluate_plan, solve_horizon, ObjectiveMode, OptModel,
    SolverConfig,
};
use bess::ecm::{current_from_dc_power, dc_power, InverterModel};
use bess::engine::{run_rolling_horizon, EngineConfig, RunLog, Scenario, StringSetup};
use bess::metrics::{kpi_report, revenue_per_soh_loss, KpiReport};
use bess::twin::simulate_window;

fn report(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

#[test]
fn a01_ecm_power_current_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let ocv = rng.gen_range(600.0..780.0);
        let r = rng.gen_range(0.05..0.3);
        let i = rng.gen_range(-150.0..150.0);
        let p_dc = dc_power(ocv, r, i);
        if p_dc == 0.0 {
            continue;
        }
        let i_back = current_from_dc_power(ocv, r, p_dc).unwrap();
        let p_back = dc_power(ocv, r, i_back);
        worst = worst.max(((p_back - p_dc) / p_dc).abs());
    }
    report(
        "ecm round trip",
        worst <= 1e-9,
        &format!("worst relative power error {worst:.3e} over 10000 samples"),
    );
}

#[test]
fn a02_aging_sqrt_law_consistency() {
    let params = CellModelParams::default_lfp_80kwh();
    // calendar: constant SOC, 10 000 hourly steps
    let soc = 0.5;
    let stress = calendar_stress(soc, &params);
    let q0 = 0.05; // above the early-life floor so the pure law applies
    let mut q = q0;
    let dt_s = 3600i64;
    for _ in 0..10_000 {
        q += calendar_loss_step(soc, q, dt_s, &params).unwrap();
    }
    let t_days = 10_000.0 * dt_s as f64 / 86_400.0;
    let q_exact = (q0 * q0 + stress * stress * t_days).sqrt();
    let cal_err = ((q - q_exact) / q_exact).abs();

    // cyclic: constant micro-cycles, 10 000 steps
    let stats = CycleStats { delta_fec: 0.01, doc: 0.4, c_rate: 1.0 };
    let sigma = cyclic_stress(stats.c_rate, stats.doc, &params);
    let mut qc = 0.05;
    for _ in 0..10_000 {
        qc += cyclic_loss(&stats, qc, &params).unwrap();
    }
    let fec = 10_000.0 * stats.delta_fec;
    let qc_exact = (0.05f64 * 0.05 + sigma * sigma * fec).sqrt();
    let cyc_err = ((qc - qc_exact) / qc_exact).abs();

    report(
        "aging sqrt-law consistency",
        cal_err <= 5e-3 && cyc_err <= 5e-3,
        &format!("calendar rel err {cal_err:.2e}, cyclic rel err {cyc_err:.2e}"),
    );
}

#[test]
fn a03_solver_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let params = CellModelParams::default_lfp_80kwh();
    let p_max = params.p_max;
    let levels: Vec<f64> = (0..5).map(|k| -p_max + p_max * k as f64 / 2.0).collect();
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.gen_range(2..=6usize);
        let grid = TimeGrid::new(0, 900, n).unwrap();
        let prices: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..200.0)).collect();
        let series = PriceSeries::new(grid, prices).unwrap();
        let state = StringState {
            soc: rng.gen_range(0.3..0.7),
            q_loss_cal: rng.gen_range(0.0..0.05),
            q_loss_cyc: rng.gen_range(0.0..0.05),
            r_incr: rng.gen_range(1.0..1.3),
            fec_total: rng.gen_range(0.0..300.0),
        };
        let mode = if case % 2 == 0 { ObjectiveMode::MarketOnly } else { ObjectiveMode::MarketPlusAging };
        let cap = if mode == ObjectiveMode::MarketOnly && case % 6 == 0 {
            Some(rng.gen_range(0.1..0.5))
        } else {
            None
        };
        let c_aging = if case % 4 < 2 { 50.0 } else { 200.0 };
        let problem =
            assemble_problem(state, series, mode, params.clone(), c_aging, cap).unwrap();
        let oracle = enumerate_optimal(&problem, 5).unwrap();
        let cfg = SolverConfig { explicit_levels: Some(levels.clone()), ..Default::default() };
        let dp = solve_horizon(&problem, &cfg).unwrap();
        let model = OptModel::new(&problem);
        let eo = evaluate_plan(&problem, &model, &oracle.p_ac).unwrap();
        let ed = evaluate_plan(&problem, &model, &dp.p_ac).unwrap();
        // the oracle is exhaustive, so the DP can only be equal or worse
        let gap = (ed.total - eo.total) / eo.total.abs().max(1.0);
        worst = worst.max(gap);
    }
    report(
        "solver vs exhaustive oracle",
        worst <= 0.01,
        &format!("worst relative objective gap {worst:.3e} over 200 instances"),
    );
}

fn default_setups() -> Vec<StringSetup> {
    RunConfig::default().setups()
}

/// Planned (believed-trajectory) FEC per run day, split at window boundaries.
fn planned_daily_fec(log: &RunLog, string_idx: usize) -> Vec<f64> {
    let mut days: BTreeMap<i64, f64> = BTreeMap::new();
    let mut step = 0usize;
    for w in &log.windows {
        let ws = &w.strings[string_idx];
        let mut prev = ws.believed_soc;
        for k in 0..w.control_steps {
            let st = &log.strings[string_idx].steps[step + k];
            let day = (st.t_s - log.grid.start_s).div_euclid(86_400);
            *days.entry(day).or_insert(0.0) += (st.planned_soc - prev).abs() / 2.0;
            prev = st.planned_soc;
        }
        step += w.control_steps;
    }
    days.into_values().collect()
}

#[test]
fn a04_daily_fec_cap_holds() {
    // 50 random-price days under the 2 FEC/day throughput limit
    let hourly = gen_synthetic_prices(4, 50, 80.0, 60.0, 12.0).unwrap();
    let target = build_time_grid(0, 50 * 86_400, 300).unwrap();
    let prices = resample_zoh(&hourly, &target).unwrap();
    let cfg = EngineConfig { fec_cap_per_day: Some(2.0), ..Default::default() };
    let params = CellModelParams::default_lfp_80kwh();
    let log = run_rolling_horizon(
        Scenario { aging_aware: true, aging_in_objective: false },
        &prices,
        &default_setups(),
        &params,
        &cfg,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for idx in 0..log.strings.len() {
        for f in log.daily_fec(idx) {
            worst = worst.max(f);
        }
        for f in planned_daily_fec(&log, idx) {
            worst = worst.max(f);
        }
    }
    report(
        "daily FEC cap",
        worst <= 2.0 + 1e-6,
        &format!("max planned/realized daily FEC {worst:.6} over 50 days x 2 strings"),
    );
}

/// Shared 14-day four-scenario comparison used by the ordering checks.
fn comparison_reports() -> &'static Vec<KpiReport> {
    static REPORTS: OnceLock<Vec<KpiReport>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let cfg = RunConfig { fec_cap_per_day: Some(2.0), ..Default::default() };
        let hourly = bess::cli::gen_synthetic_prices_jittered(
            cfg.seed,
            cfg.days,
            cfg.base_price,
            cfg.daily_amplitude,
            cfg.noise_sd,
            cfg.amplitude_jitter,
        )
        .unwrap();
        let target = build_time_grid(0, cfg.days as i64 * 86_400, cfg.dt_s).unwrap();
        let prices = resample_zoh(&hourly, &target).unwrap();
        let logs =
            bess::engine::run_comparison(&prices, &cfg.setups(), &cfg.params, &cfg.engine_config())
                .unwrap();
        logs.iter().map(|l| kpi_report(l).unwrap()).collect()
    })
}

#[test]
fn a05_aging_awareness_mechanism() {
    let reports = comparison_reports();
    let (s1, s2) = (&reports[0], &reports[1]); // unaware_market, aware_market
    let b1 = &s1.strings[1];
    let b2 = &s2.strings[1];
    let a1 = &s1.strings[0];
    let a2 = &s2.strings[0];
    let mismatch_ok = b2.mismatch <= 0.5 * b1.mismatch;
    let revenue_ok = b2.revenue > b1.revenue;
    let a_rev_ok = (a2.revenue - a1.revenue).abs() <= 0.005 * a1.revenue.abs();
    let a_mis_ok = (a2.mismatch - a1.mismatch).abs() <= 0.005;
    let a_soh_ok = (a2.delta_soh - a1.delta_soh).abs() <= 0.005 * a1.delta_soh.max(1e-9);
    report(
        "awareness mechanism (aged string)",
        mismatch_ok && revenue_ok && a_rev_ok && a_mis_ok && a_soh_ok,
        &format!(
            "string-b mismatch {:.2}% -> {:.2}%, revenue {:.0} -> {:.0} EUR; \
             string-a drift: revenue {:.3}%, mismatch {:+.4}, dSOH {:.3}%",
            100.0 * b1.mismatch,
            100.0 * b2.mismatch,
            b1.revenue,
            b2.revenue,
            100.0 * (a2.revenue - a1.revenue).abs() / a1.revenue.abs(),
            a2.mismatch - a1.mismatch,
            100.0 * (a2.delta_soh - a1.delta_soh).abs() / a1.delta_soh.max(1e-9),
        ),
    );
}

#[test]
fn a06_aging_cost_objective_ordering() {
    let reports = comparison_reports();
    let r = |k: usize| reports[k].combined_revenue_per_soh_loss.unwrap();
    let (r1, r2, r4) = (r(0), r(1), r(3));
    let ratio_ok = r4 > r2 && r2 > r1;
    let b3 = &reports[2].strings[1];
    let b4 = &reports[3].strings[1];
    let mismatch_ok = b4.mismatch < b3.mismatch;
    report(
        "aging-cost objective ordering",
        ratio_ok && mismatch_ok,
        &format!(
            "combined EUR/SOH-loss: {:.0} (unaware mkt) < {:.0} (aware mkt) < {:.0} (aware aging); \
             string-b mismatch {:.2}% (unaware aging) vs {:.2}% (aware aging)",
            r1,
            r2,
            r4,
            100.0 * b3.mismatch,
            100.0 * b4.mismatch,
        ),
    );
}

#[test]
fn a07_degradation_cost_monotonicity() {
    let hourly = gen_synthetic_prices(7, 1, 80.0, 60.0, 0.0).unwrap();
    let target = build_time_grid(0, 12 * 3600, 300).unwrap();
    let prices = resample_zoh(&hourly, &target).unwrap();
    let params = CellModelParams::default_lfp_80kwh();
    let mut state = StringState::fresh(0.5);
    state.q_loss_cyc = 0.03;
    state.fec_total = 200.0;
    let mut fecs = Vec::new();
    for c_aging in [0.0, 50.0, 200.0, 1000.0] {
        let problem = assemble_problem(
            state,
            prices.clone(),
            ObjectiveMode::MarketPlusAging,
            params.clone(),
            c_aging,
            None,
        )
        .unwrap();
        let s = solve_horizon(&problem, &SolverConfig::default()).unwrap();
        fecs.push(s.predicted_dfec);
    }
    let monotone = fecs.windows(2).all(|w| w[1] <= w[0] + 1e-9);

    // spread-free day: a large degradation price must produce the idle plan
    let flat = PriceSeries::new(target, vec![80.0; target.n_steps]).unwrap();
    let problem = assemble_problem(
        state,
        flat,
        ObjectiveMode::MarketPlusAging,
        params,
        1000.0,
        None,
    )
    .unwrap();
    let idle = solve_horizon(&problem, &SolverConfig::default()).unwrap();
    let idle_ok = idle.p_ac.iter().all(|&p| p == 0.0);
    report(
        "degradation cost monotonicity",
        monotone && idle_ok,
        &format!("predicted FEC over c_aging sweep: {fecs:?}; flat-day idle: {idle_ok}"),
    );
}

#[test]
fn a08_twin_respects_physical_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let params = CellModelParams::default_lfp_80kwh();
    let inv = InverterModel::default_curve();
    let mut worst_balance = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..1000 {
        let state = StringState {
            soc: rng.gen_range(0.1..0.9),
            q_loss_cal: rng.gen_range(0.0..0.1),
            q_loss_cyc: rng.gen_range(0.0..0.05),
            r_incr: rng.gen_range(1.0..1.3),
            fec_total: rng.gen_range(0.0..400.0),
        };
        let n = 24;
        let grid = TimeGrid::new(0, 300, n).unwrap();
        let sched: Vec<f64> = (0..n).map(|_| rng.gen_range(-110.0..110.0)).collect();
        let w = simulate_window(&state, &sched, &params, &inv, &grid).unwrap();
        let mut charge_as = 0.0;
        for st in &w.steps {
            if st.p_ac_realized.abs() > params.p_max + 1e-9
                || st.i.abs() > params.i_max + 1e-9
                || st.v < params.v_min - 1e-9
                || st.v > params.v_max + 1e-9
                || st.soc_after < params.soc_min - 1e-9
                || st.soc_after > params.soc_max + 1e-9
            {
                violations += 1;
            }
            charge_as += st.i * 300.0;
        }
        let q_as = params.charge_capacity_as() * state.soh();
        let balance = (charge_as / q_as - (w.state_after.soc - state.soc)).abs();
        worst_balance = worst_balance.max(balance);
    }
    report(
        "twin physical bounds",
        violations == 0 && worst_balance <= 1e-9 * 25.0,
        &format!("{violations} bound violations, worst charge imbalance {worst_balance:.3e} SOC"),
    );
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
        }
    }
    out
}

#[test]
fn a09_repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { days: 1, out_dir: dir.path().join("out"), ..Default::default() };
    cmd_run(&cfg).unwrap();
    let first = snapshot(&cfg.out_dir);
    cmd_run(&cfg).unwrap();
    let second = snapshot(&cfg.out_dir);
    let identical = first == second;
    report(
        "run determinism",
        identical,
        &format!("{} artifacts compared byte-for-byte", first.len()),
    );
}

#[test]
fn a10_published_ratio_normalization() {
    // published reference pair: 4 846 EUR of revenue over 5.1% SOH loss,
    // printed alongside a ratio of 93 630 EUR per unit SOH
    let ratio = revenue_per_soh_loss(4846.0, 0.051).unwrap();
    let rel = (ratio - 93_630.0).abs() / 93_630.0;
    report(
        "published ratio normalization",
        rel <= 0.01,
        &format!(
            "4846/0.051 = {ratio:.1} EUR per unit SOH vs published 93630 (rel err {:.3}%); \
             the published inputs are rounded to a precision that cannot reproduce the \
             published ratio under any fixed normalization",
            100.0 * rel
        ),
    );
}
