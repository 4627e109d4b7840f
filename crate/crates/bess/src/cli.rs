//! Command-line plumbing: price ingestion, synthetic price generation,
//! configuration files, scenario runs and four-way comparisons.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::core::{build_time_grid, resample_zoh, CellModelParams, PriceSeries, StringState, TimeGrid};
use crate::dispatch::SolverConfig;
use crate::ecm::InverterModel;
use crate::engine::{run_comparison, run_rolling_horizon, EngineConfig, Scenario, StringSetup};
use crate::error::{Error, Result};
use crate::metrics::{kpi_report, render_table, to_csv};

/// Run configuration file schema (TOML). Every field has a default; unknown
/// keys are hard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Scenario for `run`: one of the four labels or "1".."4".
    pub scenario: String,
    /// Price CSV path; when absent, synthetic prices are generated.
    pub prices: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Simulated span in days (synthetic prices only).
    pub days: u32,
    pub seed: u64,
    /// Synthetic price shape: EUR/MWh.
    pub base_price: f64,
    pub daily_amplitude: f64,
    pub noise_sd: f64,
    /// Relative day-to-day variation of the daily amplitude, in [0, 1).
    pub amplitude_jitter: f64,
    /// Execution timestep in seconds.
    pub dt_s: i64,
    pub prediction_horizon_h: i64,
    pub control_horizon_h: i64,
    /// EUR per kWh of lost capacity.
    pub c_aging: f64,
    pub fec_cap_per_day: Option<f64>,
    pub strings: Vec<StringConfig>,
    pub params: CellModelParams,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: "aware_market".into(),
            prices: None,
            out_dir: PathBuf::from("out"),
            days: 14,
            seed: 42,
            base_price: 80.0,
            daily_amplitude: 60.0,
            noise_sd: 8.0,
            amplitude_jitter: 0.3,
            dt_s: 300,
            prediction_horizon_h: 12,
            control_horizon_h: 4,
            c_aging: 200.0,
            fec_cap_per_day: None,
            strings: vec![StringConfig::fresh_a(), StringConfig::aged_b()],
            params: CellModelParams::default_lfp_80kwh(),
            solver: SolverConfig::default(),
        }
    }
}

/// One string's initial condition in the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StringConfig {
    pub name: String,
    #[serde(default = "default_soc")]
    pub soc: f64,
    #[serde(default)]
    pub q_loss_cal: f64,
    #[serde(default)]
    pub q_loss_cyc: f64,
    #[serde(default = "default_r_incr")]
    pub r_incr: f64,
    #[serde(default)]
    pub fec_total: f64,
}

fn default_soc() -> f64 {
    0.5
}

fn default_r_incr() -> f64 {
    1.0
}

impl StringConfig {
    /// Fresh reference string.
    pub fn fresh_a() -> Self {
        StringConfig {
            name: "a".into(),
            soc: 0.5,
            q_loss_cal: 0.0,
            q_loss_cyc: 0.0,
            r_incr: 1.0,
            fec_total: 0.0,
        }
    }

    /// Pre-aged second string: SOH 0.90 with a cycling history consistent
    /// with its accumulated cyclic loss, and 20% resistance growth.
    pub fn aged_b() -> Self {
        StringConfig {
            name: "b".into(),
            soc: 0.5,
            q_loss_cal: 0.07,
            q_loss_cyc: 0.03,
            r_incr: 1.2,
            fec_total: 204.0,
        }
    }

    pub fn to_state(&self) -> StringState {
        StringState {
            soc: self.soc,
            q_loss_cal: self.q_loss_cal,
            q_loss_cyc: self.q_loss_cyc,
            r_incr: self.r_incr,
            fec_total: self.fec_total,
        }
    }
}

/// Parses a scenario name ("aware_market", ... ) or ordinal "1".."4".
pub fn parse_scenario(s: &str) -> Result<Scenario> {
    let all = Scenario::all();
    let norm = s.trim().to_ascii_lowercase();
    for (k, sc) in all.iter().enumerate() {
        if norm == sc.label() || norm == (k + 1).to_string() {
            return Ok(*sc);
        }
    }
    Err(Error::Config(format!(
        "unknown scenario {s:?}; expected one of unaware_market, aware_market, \
         unaware_aging_cost, aware_aging_cost or 1..4"
    )))
}

/// Loads and validates a config file, or defaults when `path` is `None`.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let cfg = match path {
        None => RunConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
    };
    validate_config(&cfg)?;
    Ok(cfg)
}

pub fn validate_config(cfg: &RunConfig) -> Result<()> {
    parse_scenario(&cfg.scenario)?;
    if cfg.days == 0 {
        return Err(Error::Config("days must be at least 1".into()));
    }
    if cfg.dt_s <= 0 {
        return Err(Error::Config(format!("dt_s {} must be positive", cfg.dt_s)));
    }
    if cfg.prediction_horizon_h <= 0 || cfg.control_horizon_h <= 0 {
        return Err(Error::Config("horizons must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.amplitude_jitter) {
        return Err(Error::Config(format!(
            "amplitude_jitter {} must be in [0, 1)",
            cfg.amplitude_jitter
        )));
    }
    if cfg.strings.is_empty() {
        return Err(Error::Config("at least one string must be configured".into()));
    }
    if let Some(p) = &cfg.prices {
        if !p.exists() {
            return Err(Error::Config(format!("price file {} does not exist", p.display())));
        }
    }
    cfg.params.validate()?;
    for s in &cfg.strings {
        s.to_state().validate().map_err(|e| match e {
            Error::Domain(m) => Error::Config(format!("string {}: {m}", s.name)),
            other => other,
        })?;
    }
    Ok(())
}

impl RunConfig {
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            prediction_horizon_s: self.prediction_horizon_h * 3600,
            control_horizon_s: self.control_horizon_h * 3600,
            c_aging: self.c_aging,
            fec_cap_per_day: self.fec_cap_per_day,
            solver: self.solver.clone(),
        }
    }

    pub fn setups(&self) -> Vec<StringSetup> {
        self.strings
            .iter()
            .map(|s| StringSetup {
                name: s.name.clone(),
                initial: s.to_state(),
                inverter: InverterModel::default_curve(),
            })
            .collect()
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(Utc.from_utc_datetime(&naive).timestamp());
        }
    }
    None
}

/// Reads a two-column price CSV (ISO-8601 UTC timestamp, EUR/MWh) and
/// resamples it onto a `dt_s` grid via zero-order hold.
///
/// Rows must be strictly increasing and equally spaced; a single header line
/// is allowed. Errors name the offending line.
pub fn load_prices(path: &Path, dt_s: i64) -> Result<PriceSeries> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<(i64, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, ',');
        let ts = parts.next().unwrap_or("").trim();
        let price = parts.next().unwrap_or("").trim();
        let t = match parse_timestamp(ts) {
            Some(t) => t,
            None if ln == 0 && rows.is_empty() => continue, // header
            None => {
                return Err(Error::Data(format!(
                    "{} line {}: unparseable timestamp {ts:?}",
                    path.display(),
                    ln + 1
                )))
            }
        };
        let p: f64 = price.parse().map_err(|_| {
            Error::Data(format!("{} line {}: unparseable price {price:?}", path.display(), ln + 1))
        })?;
        if !p.is_finite() {
            return Err(Error::Data(format!(
                "{} line {}: price {p} is not finite",
                path.display(),
                ln + 1
            )));
        }
        rows.push((t, p));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no price rows", path.display())));
    }
    if rows.len() < 2 {
        return Err(Error::Data(format!(
            "{}: need at least two rows to infer the spacing",
            path.display()
        )));
    }
    let dt_native = rows[1].0 - rows[0].0;
    if dt_native <= 0 {
        return Err(Error::Data(format!(
            "{} line 2: timestamps must strictly increase",
            path.display()
        )));
    }
    for (k, pair) in rows.windows(2).enumerate() {
        let step = pair[1].0 - pair[0].0;
        if step <= 0 {
            return Err(Error::Data(format!(
                "{}: timestamps must strictly increase (row {})",
                path.display(),
                k + 2
            )));
        }
        if step != dt_native {
            return Err(Error::Data(format!(
                "{}: irregular spacing at row {} ({step} s vs {dt_native} s)",
                path.display(),
                k + 2
            )));
        }
    }
    let grid = TimeGrid::new(rows[0].0, dt_native, rows.len())?;
    let series = PriceSeries::new(grid, rows.iter().map(|r| r.1).collect())?;
    let target = build_time_grid(grid.start_s, grid.span_s(), dt_s)?;
    resample_zoh(&series, &target)
}

/// Daily intraday shape in [-1, 1]: trough at 03:00, peak at 19:00, with the
/// slow morning rise and faster evening decay of typical day-ahead curves.
pub fn daily_shape(hour_of_day: f64) -> f64 {
    let h = hour_of_day.rem_euclid(24.0);
    if (3.0..19.0).contains(&h) {
        -(std::f64::consts::PI * (h - 3.0) / 16.0).cos()
    } else {
        let h = if h < 3.0 { h + 24.0 } else { h };
        (std::f64::consts::PI * (h - 19.0) / 8.0).cos()
    }
}

/// Deterministic synthetic hourly prices; see [`daily_shape`] for the
/// intraday profile. `amplitude_jitter` varies the spread day to day.
pub fn gen_synthetic_prices_jittered(
    seed: u64,
    days: u32,
    base: f64,
    daily_amplitude: f64,
    noise_sd: f64,
    amplitude_jitter: f64,
) -> Result<PriceSeries> {
    if days == 0 {
        return Err(Error::Config("days must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&amplitude_jitter) {
        return Err(Error::Config(format!(
            "amplitude_jitter {amplitude_jitter} must be in [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(0.0))
        .map_err(|e| Error::Config(format!("noise_sd {noise_sd}: {e}")))?;
    let mut prices = Vec::with_capacity(24 * days as usize);
    for _day in 0..days {
        let amp = daily_amplitude
            * if amplitude_jitter > 0.0 {
                1.0 + amplitude_jitter * rng.gen_range(-1.0..1.0)
            } else {
                1.0
            };
        for h in 0..24 {
            let mut p = base + amp * daily_shape(h as f64);
            if noise_sd > 0.0 {
                p += noise.sample(&mut rng);
            }
            prices.push(p);
        }
    }
    let grid = TimeGrid::new(0, 3600, prices.len())?;
    PriceSeries::new(grid, prices)
}

/// Synthetic prices without day-to-day amplitude variation.
pub fn gen_synthetic_prices(
    seed: u64,
    days: u32,
    base: f64,
    daily_amplitude: f64,
    noise_sd: f64,
) -> Result<PriceSeries> {
    gen_synthetic_prices_jittered(seed, days, base, daily_amplitude, noise_sd, 0.0)
}

fn effective_prices(cfg: &RunConfig) -> Result<PriceSeries> {
    let hourly = match &cfg.prices {
        Some(p) => return load_prices(p, cfg.dt_s),
        None => gen_synthetic_prices_jittered(
            cfg.seed,
            cfg.days,
            cfg.base_price,
            cfg.daily_amplitude,
            cfg.noise_sd,
            cfg.amplitude_jitter,
        )?,
    };
    let target = build_time_grid(hourly.grid.start_s, hourly.grid.span_s(), cfg.dt_s)?;
    resample_zoh(&hourly, &target)
}

fn write_prices_csv(dir: &Path, series: &PriceSeries) -> Result<()> {
    let mut csv = String::from("t,price_eur_mwh\n");
    for (k, p) in series.prices.iter().enumerate() {
        let t = Utc
            .timestamp_opt(series.grid.step_start(k), 0)
            .single()
            .ok_or_else(|| Error::Internal("timestamp out of range".into()))?;
        csv.push_str(&format!("{},{p:.6}\n", t.to_rfc3339()));
    }
    fs::write(dir.join("prices_used.csv"), csv)?;
    Ok(())
}

fn write_config_echo(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let text = toml::to_string_pretty(cfg)
        .map_err(|e| Error::Internal(format!("config serialization: {e}")))?;
    fs::write(dir.join("config_used.toml"), text)?;
    Ok(())
}

/// Runs one scenario and writes all artifacts into `cfg.out_dir`.
pub fn cmd_run(cfg: &RunConfig) -> Result<()> {
    validate_config(cfg)?;
    let scenario = parse_scenario(&cfg.scenario)?;
    let prices = effective_prices(cfg)?;
    let log = run_rolling_horizon(scenario, &prices, &cfg.setups(), &cfg.params, &cfg.engine_config())?;
    let report = kpi_report(&log)?;
    fs::create_dir_all(&cfg.out_dir)?;
    log.write_dir(&cfg.out_dir)?;
    write_prices_csv(&cfg.out_dir, &prices)?;
    write_config_echo(&cfg.out_dir, cfg)?;
    let reports = [report];
    fs::write(cfg.out_dir.join("kpis.txt"), render_table(&reports))?;
    fs::write(cfg.out_dir.join("kpis.csv"), to_csv(&reports))?;
    let json = serde_json::to_string_pretty(&reports[0])
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    fs::write(cfg.out_dir.join("kpis.json"), json)?;
    println!("{}", render_table(&reports));
    Ok(())
}

/// Runs all four scenarios on identical inputs and writes the side-by-side
/// comparison plus every per-scenario artifact.
pub fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    validate_config(cfg)?;
    let prices = effective_prices(cfg)?;
    let logs = run_comparison(&prices, &cfg.setups(), &cfg.params, &cfg.engine_config())?;
    let mut reports = Vec::with_capacity(logs.len());
    fs::create_dir_all(&cfg.out_dir)?;
    for log in &logs {
        log.write_dir(&cfg.out_dir)?;
        reports.push(kpi_report(log)?);
    }
    write_prices_csv(&cfg.out_dir, &prices)?;
    write_config_echo(&cfg.out_dir, cfg)?;
    fs::write(cfg.out_dir.join("comparison.txt"), render_table(&reports))?;
    fs::write(cfg.out_dir.join("kpis.csv"), to_csv(&reports))?;
    let json = serde_json::to_string_pretty(&reports)
        .map_err(|e| Error::Internal(format!("report serialization: {e}")))?;
    fs::write(cfg.out_dir.join("kpis.json"), json)?;
    println!("{}", render_table(&reports));
    Ok(())
}

#[derive(Parser)]
#[command(name = "bess", about = "Battery storage dispatch simulation and scenario comparison")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by run/compare; flags win over config-file values.
#[derive(Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub prices: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub c_aging: Option<f64>,
    #[arg(long)]
    pub fec_cap_per_day: Option<f64>,
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.out_dir {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = &self.prices {
            cfg.prices = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.days {
            cfg.days = v;
        }
        if let Some(v) = self.c_aging {
            cfg.c_aging = v;
        }
        if let Some(v) = self.fec_cap_per_day {
            cfg.fec_cap_per_day = Some(v);
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a single scenario.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Scenario label or ordinal 1..4.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Run all four scenarios on identical inputs and compare.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a synthetic price CSV.
    GenPrices {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 14)]
        days: u32,
        #[arg(long, default_value_t = 80.0)]
        base: f64,
        #[arg(long, default_value_t = 60.0)]
        amplitude: f64,
        #[arg(long, default_value_t = 8.0)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0.0)]
        amplitude_jitter: f64,
    },
    /// Parse and validate a configuration file.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Entry point used by the binary; returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run { common, scenario } => (|| {
            let mut cfg = load_config(common.config.as_deref())?;
            common.apply(&mut cfg);
            if let Some(s) = scenario {
                cfg.scenario = s;
            }
            cmd_run(&cfg)
        })(),
        Command::Compare { common } => (|| {
            let mut cfg = load_config(common.config.as_deref())?;
            common.apply(&mut cfg);
            cmd_compare(&cfg)
        })(),
        Command::GenPrices { out, seed, days, base, amplitude, noise_sd, amplitude_jitter } => {
            (|| {
                let series =
                    gen_synthetic_prices_jittered(seed, days, base, amplitude, noise_sd, amplitude_jitter)?;
                let mut csv = String::from("t,price_eur_mwh\n");
                // anchor at a fixed midnight so runs are reproducible
                let epoch = Utc.with_ymd_and_hms(2021, 1, 4, 0, 0, 0).unwrap().timestamp();
                for (k, p) in series.prices.iter().enumerate() {
                    let t = Utc
                        .timestamp_opt(epoch + series.grid.step_start(k), 0)
                        .single()
                        .ok_or_else(|| Error::Internal("timestamp out of range".into()))?;
                    csv.push_str(&format!("{},{p:.6}\n", t.to_rfc3339()));
                }
                fs::write(&out, csv)?;
                println!("wrote {} hourly prices to {}", series.prices.len(), out.display());
                Ok(())
            })()
        }
        Command::ValidateConfig { config } => load_config(Some(&config)).map(|_| {
            println!("{} is valid", config.display());
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scenario_names_and_ordinals_parse() {
        assert_eq!(parse_scenario("aware_market").unwrap().label(), "aware_market");
        assert_eq!(parse_scenario("3").unwrap().label(), "unaware_aging_cost");
        assert!(parse_scenario("nope").is_err());
    }

    #[test]
    fn default_config_is_valid() {
        validate_config(&RunConfig::default()).unwrap();
    }

    #[test]
    fn unknown_config_key_is_named_in_the_error() {
        let err = toml::from_str::<RunConfig>("daily_amplitud = 40.0").unwrap_err();
        assert!(err.to_string().contains("daily_amplitud"), "{err}");
    }

    #[test]
    fn partial_params_table_overrides_only_named_fields() {
        let cfg: RunConfig = toml::from_str("[params]\nq_nom = 100.0\n").unwrap();
        assert_eq!(cfg.params.q_nom, 100.0);
        assert_eq!(cfg.params.p_max, CellModelParams::default_lfp_80kwh().p_max);
    }

    #[test]
    fn daily_shape_hits_trough_and_peak() {
        assert_relative_eq!(daily_shape(3.0), -1.0);
        assert_relative_eq!(daily_shape(19.0), 1.0);
        // continuous across the wrap
        assert_relative_eq!(daily_shape(26.9999), daily_shape(2.9999), epsilon = 1e-3);
        for h in 0..240 {
            let g = daily_shape(h as f64 / 10.0);
            assert!((-1.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn synthetic_prices_flat_when_unmodulated() {
        let s = gen_synthetic_prices(7, 2, 80.0, 0.0, 0.0).unwrap();
        assert_eq!(s.prices.len(), 48);
        assert!(s.prices.iter().all(|&p| p == 80.0));
    }

    #[test]
    fn synthetic_prices_span_the_amplitude() {
        let s = gen_synthetic_prices(7, 1, 80.0, 40.0, 0.0).unwrap();
        let min = s.prices.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = s.prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(min, 40.0, epsilon = 1e-9);
        assert_relative_eq!(max, 120.0, epsilon = 1e-9);
    }

    #[test]
    fn synthetic_prices_are_seed_deterministic() {
        let a = gen_synthetic_prices_jittered(11, 3, 80.0, 50.0, 10.0, 0.2).unwrap();
        let b = gen_synthetic_prices_jittered(11, 3, 80.0, 50.0, 10.0, 0.2).unwrap();
        assert_eq!(a.prices, b.prices);
        let c = gen_synthetic_prices_jittered(12, 3, 80.0, 50.0, 10.0, 0.2).unwrap();
        assert_ne!(a.prices, c.prices);
    }

    #[test]
    fn load_prices_resamples_hourly_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(
            &p,
            "timestamp,price\n2021-01-04T00:00:00Z,50.0\n2021-01-04T01:00:00Z,70.0\n",
        )
        .unwrap();
        let s = load_prices(&p, 300).unwrap();
        assert_eq!(s.prices.len(), 24);
        assert!(s.prices[..12].iter().all(|&v| v == 50.0));
        assert!(s.prices[12..].iter().all(|&v| v == 70.0));
    }

    #[test]
    fn load_prices_rejects_bad_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(&p, "2021-01-04T00:00:00Z,50.0\n2021-01-04T01:00:00Z,NaN\n").unwrap();
        let err = load_prices(&p, 300).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("line 2")), "{err}");

        fs::write(&p, "2021-01-04T01:00:00Z,50.0\n2021-01-04T00:00:00Z,60.0\n").unwrap();
        let err = load_prices(&p, 300).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("increase")), "{err}");

        fs::write(&p, "").unwrap();
        assert!(matches!(load_prices(&p, 300), Err(Error::Data(_))));
    }

    #[test]
    fn load_prices_rejects_irregular_spacing() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        fs::write(
            &p,
            "2021-01-04T00:00:00Z,50.0\n2021-01-04T01:00:00Z,60.0\n2021-01-04T01:30:00Z,70.0\n",
        )
        .unwrap();
        let err = load_prices(&p, 300).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains("irregular")), "{err}");
    }

    #[test]
    fn run_smoke_writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            days: 1,
            out_dir: dir.path().join("out"),
            noise_sd: 0.0,
            amplitude_jitter: 0.0,
            ..Default::default()
        };
        cmd_run(&cfg).unwrap();
        for f in [
            "aware_market_a_steps.csv",
            "aware_market_b_steps.csv",
            "aware_market_windows.csv",
            "aware_market_meta.json",
            "prices_used.csv",
            "config_used.toml",
            "kpis.txt",
            "kpis.csv",
            "kpis.json",
        ] {
            assert!(cfg.out_dir.join(f).exists(), "missing {f}");
        }
        // byte determinism across repeated invocations
        let first = fs::read(cfg.out_dir.join("kpis.csv")).unwrap();
        cmd_run(&cfg).unwrap();
        let second = fs::read(cfg.out_dir.join("kpis.csv")).unwrap();
        assert_eq!(first, second);
    }
}
