//! KPIs computed from a run log: schedule mismatch, revenue, missed revenue,
//! SOH loss, and revenue per unit of SOH loss.

use serde::{Deserialize, Serialize};

use crate::engine::RunLog;
use crate::error::{Error, Result};

/// The five KPIs for one string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringKpis {
    pub name: String,
    /// 1 - realized/planned absolute throughput; 0 = perfect fulfillment.
    pub mismatch: f64,
    /// Realized market revenue in EUR (positive = profit).
    pub revenue: f64,
    /// Relative revenue shortfall vs. the planned schedule; `None` when the
    /// realized revenue is zero.
    pub missed_revenue: Option<f64>,
    /// SOH lost over the run (fraction of nominal capacity).
    pub delta_soh: f64,
    /// EUR per unit-fraction of SOH lost; `None` when no SOH was lost.
    pub revenue_per_soh_loss: Option<f64>,
    /// Realized full equivalent cycles over the run.
    pub delta_fec: f64,
}

/// KPIs for one scenario run: per string plus system aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario: String,
    pub strings: Vec<StringKpis>,
    pub total_revenue: f64,
    pub total_delta_soh: f64,
    pub total_delta_fec: f64,
    /// Sum of the per-string revenue/SOH-loss ratios; `None` when no string
    /// has a defined ratio.
    pub combined_revenue_per_soh_loss: Option<f64>,
}

fn check_string(log: &RunLog, idx: usize) -> Result<()> {
    if idx >= log.strings.len() {
        return Err(Error::Domain(format!(
            "string index {idx} out of range for {} strings",
            log.strings.len()
        )));
    }
    Ok(())
}

/// Relative throughput shortfall between plan and execution.
///
/// Absolute sums by default so that charge/discharge errors cannot cancel;
/// `signed` switches to raw sums for fidelity experiments.
pub fn power_schedule_mismatch(log: &RunLog, idx: usize, signed: bool) -> Result<f64> {
    check_string(log, idx)?;
    let s = &log.strings[idx];
    let (planned, realized) = s.steps.iter().fold((0.0, 0.0), |(p, r), st| {
        if signed {
            (p + st.planned_p_ac, r + st.realized_p_ac)
        } else {
            (p + st.planned_p_ac.abs(), r + st.realized_p_ac.abs())
        }
    });
    if planned == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - realized / planned)
}

/// Realized market revenue in EUR; positive when selling high and buying low.
pub fn revenue(log: &RunLog, idx: usize) -> Result<f64> {
    check_string(log, idx)?;
    let dt_h = log.grid.dt_hours();
    Ok(log.strings[idx]
        .steps
        .iter()
        .map(|st| -st.realized_p_ac * st.price * dt_h / 1000.0)
        .sum())
}

fn planned_revenue(log: &RunLog, idx: usize) -> f64 {
    let dt_h = log.grid.dt_hours();
    log.strings[idx]
        .steps
        .iter()
        .map(|st| -st.planned_p_ac * st.price * dt_h / 1000.0)
        .sum()
}

/// Relative revenue lost to unfulfilled setpoints: (R_sim - R_opt) / R_sim.
/// Negative when execution underdelivers at favorable prices.
pub fn missed_revenue(log: &RunLog, idx: usize) -> Result<Option<f64>> {
    check_string(log, idx)?;
    let r_sim = revenue(log, idx)?;
    if r_sim == 0.0 {
        return Ok(None);
    }
    let r_opt = planned_revenue(log, idx);
    Ok(Some((r_sim - r_opt) / r_sim))
}

/// SOH lost between the log's state endpoints.
pub fn delta_soh(log: &RunLog, idx: usize) -> Result<f64> {
    check_string(log, idx)?;
    let s = &log.strings[idx];
    Ok(s.initial.soh() - s.final_state.soh())
}

/// EUR of revenue per unit-fraction of SOH lost.
pub fn revenue_per_soh_loss(revenue: f64, delta_soh: f64) -> Option<f64> {
    if delta_soh > 0.0 {
        Some(revenue / delta_soh)
    } else {
        None
    }
}

/// Computes all five KPIs per string plus system aggregates.
pub fn kpi_report(log: &RunLog) -> Result<KpiReport> {
    let mut strings = Vec::with_capacity(log.strings.len());
    for idx in 0..log.strings.len() {
        let rev = revenue(log, idx)?;
        let dsoh = delta_soh(log, idx)?;
        let s = &log.strings[idx];
        strings.push(StringKpis {
            name: s.name.clone(),
            mismatch: power_schedule_mismatch(log, idx, false)?,
            revenue: rev,
            missed_revenue: missed_revenue(log, idx)?,
            delta_soh: dsoh,
            revenue_per_soh_loss: revenue_per_soh_loss(rev, dsoh),
            delta_fec: s.final_state.fec_total - s.initial.fec_total,
        });
    }
    let total_revenue = strings.iter().map(|s| s.revenue).sum();
    let total_delta_soh = strings.iter().map(|s| s.delta_soh).sum();
    let total_delta_fec = strings.iter().map(|s| s.delta_fec).sum();
    let ratios: Vec<f64> = strings.iter().filter_map(|s| s.revenue_per_soh_loss).collect();
    let combined = if ratios.is_empty() { None } else { Some(ratios.iter().sum()) };
    Ok(KpiReport {
        scenario: log.scenario.label().to_string(),
        strings,
        total_revenue,
        total_delta_soh,
        total_delta_fec,
        combined_revenue_per_soh_loss: combined,
    })
}

fn fmt_opt(v: Option<f64>, pct: bool) -> String {
    match v {
        None => "n/a".to_string(),
        Some(x) if pct => format!("{:.2}%", 100.0 * x),
        Some(x) => format!("{x:.0}"),
    }
}

/// Side-by-side text table over several scenario reports, one row per KPI and
/// one column per (scenario, string) plus a system column per scenario.
pub fn render_table(reports: &[KpiReport]) -> String {
    let mut cols: Vec<String> = vec!["KPI".into()];
    for r in reports {
        for s in &r.strings {
            cols.push(format!("{}/{}", r.scenario, s.name));
        }
        cols.push(format!("{}/system", r.scenario));
    }
    let mut rows: Vec<Vec<String>> = vec![cols];
    let kpi_rows: [(&str, Box<dyn Fn(&StringKpis) -> String>, Box<dyn Fn(&KpiReport) -> String>); 5] = [
        (
            "Power schedule mismatch",
            Box::new(|s| format!("{:.2}%", 100.0 * s.mismatch)),
            Box::new(|_| "-".into()),
        ),
        (
            "Revenues (EUR)",
            Box::new(|s| format!("{:.0}", s.revenue)),
            Box::new(|r| format!("{:.0}", r.total_revenue)),
        ),
        (
            "Missed revenues",
            Box::new(|s| fmt_opt(s.missed_revenue, true)),
            Box::new(|_| "-".into()),
        ),
        (
            "SOH loss",
            Box::new(|s| format!("{:.2}%", 100.0 * s.delta_soh)),
            Box::new(|r| format!("{:.2}%", 100.0 * r.total_delta_soh)),
        ),
        (
            "Revenue per unit SOH loss (EUR)",
            Box::new(|s| fmt_opt(s.revenue_per_soh_loss, false)),
            Box::new(|r| fmt_opt(r.combined_revenue_per_soh_loss, false)),
        ),
    ];
    for (name, per_string, per_system) in &kpi_rows {
        let mut row = vec![name.to_string()];
        for r in reports {
            for s in &r.strings {
                row.push(per_string(s));
            }
            row.push(per_system(r));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap())
        .collect();
    let mut out = String::new();
    for (ri, row) in rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            if c == 0 {
                out.push_str(&format!("{:<w$}", cell, w = widths[c]));
            } else {
                out.push_str(&format!("{:>w$}", cell, w = widths[c]));
            }
        }
        out.push('\n');
        if ri == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

/// Flat CSV over several scenario reports, one row per (scenario, string).
pub fn to_csv(reports: &[KpiReport]) -> String {
    let mut out = String::from(
        "scenario,string,mismatch,revenue_eur,missed_revenue,delta_soh,revenue_per_soh_loss_eur,delta_fec\n",
    );
    for r in reports {
        for s in &r.strings {
            out.push_str(&format!(
                "{},{},{:.9},{:.6},{},{:.9},{},{:.9}\n",
                r.scenario,
                s.name,
                s.mismatch,
                s.revenue,
                s.missed_revenue.map_or(String::new(), |v| format!("{v:.9}")),
                s.delta_soh,
                s.revenue_per_soh_loss.map_or(String::new(), |v| format!("{v:.6}")),
                s.delta_fec,
            ));
        }
        out.push_str(&format!(
            "{},system,,{:.6},,{:.9},{},{:.9}\n",
            r.scenario,
            r.total_revenue,
            r.total_delta_soh,
            r.combined_revenue_per_soh_loss
                .map_or(String::new(), |v| format!("{v:.6}")),
            r.total_delta_fec,
        ));
    }
    out
}
