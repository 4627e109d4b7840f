//! Equivalent-circuit electrical model: OCV interpolation, terminal voltage,
//! power-to-current inversion, and the AC/DC inverter coupling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-linear open-circuit voltage curve over SOC in [0, 1].
///
/// Voltages are string-aggregate volts; both coordinates strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcvCurve {
    pub breakpoints: Vec<(f64, f64)>,
}

impl OcvCurve {
    pub fn new(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let curve = OcvCurve { breakpoints };
        curve.validate()?;
        Ok(curve)
    }

    /// Default 21-point LFP-shaped table: steep ends, flat mid-plateau.
    /// The values are fixtures for a ~700 V string, not data from any cell study.
    pub fn default_lfp() -> Self {
        let volts = [
            620.0, 658.0, 676.0, 684.0, 688.0, 690.0, 691.5, 693.0, 694.5, 696.0, 697.5,
            699.0, 700.5, 702.0, 703.5, 705.0, 707.0, 709.5, 713.0, 725.0, 760.0,
        ];
        let breakpoints = volts
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as f64 * 0.05, v))
            .collect();
        OcvCurve { breakpoints }
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.len() < 2 {
            return Err(Error::Config("OCV curve needs at least 2 breakpoints".into()));
        }
        let first = self.breakpoints.first().unwrap();
        let last = self.breakpoints.last().unwrap();
        if first.0 != 0.0 || last.0 != 1.0 {
            return Err(Error::Config("OCV curve must span SOC [0, 1]".into()));
        }
        for w in self.breakpoints.windows(2) {
            if w[1].0 <= w[0].0 || w[1].1 <= w[0].1 {
                return Err(Error::Config(format!(
                    "OCV curve must be strictly increasing; violated between ({}, {}) and ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(())
    }

    /// Parses a two-column whitespace/comma-separated text table (soc, volts).
    /// Lines starting with '#' and blank lines are skipped.
    pub fn from_table(text: &str) -> Result<Self> {
        let mut breakpoints = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Data(format!(
                    "OCV table line {}: expected two columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let soc: f64 = fields[0].parse().map_err(|_| {
                Error::Data(format!("OCV table line {}: bad soc '{}'", lineno + 1, fields[0]))
            })?;
            let v: f64 = fields[1].parse().map_err(|_| {
                Error::Data(format!("OCV table line {}: bad voltage '{}'", lineno + 1, fields[1]))
            })?;
            breakpoints.push((soc, v));
        }
        OcvCurve::new(breakpoints)
    }

    /// Mean voltage over the full SOC range (trapezoid over the breakpoints).
    pub fn mean_voltage(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum()
    }
}

/// Open-circuit voltage at `soc` by piecewise-linear interpolation.
pub fn ocv(soc: f64, curve: &OcvCurve) -> Result<f64> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(Error::Domain(format!("soc {soc} outside [0, 1]")));
    }
    let bp = &curve.breakpoints;
    // binary search for the segment containing soc
    let idx = bp.partition_point(|&(s, _)| s <= soc);
    if idx == 0 {
        return Ok(bp[0].1);
    }
    if idx == bp.len() {
        return Ok(bp[bp.len() - 1].1);
    }
    let (s0, v0) = bp[idx - 1];
    let (s1, v1) = bp[idx];
    Ok(v0 + (v1 - v0) * (soc - s0) / (s1 - s0))
}

/// `R = R0 * r_incr` for an aged string.
pub fn effective_resistance(r0: f64, r_incr: f64) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(Error::Domain(format!("r0 {r0} must be positive")));
    }
    if r_incr < 1.0 {
        return Err(Error::Domain(format!("r_incr {r_incr} below 1")));
    }
    Ok(r0 * r_incr)
}

/// Terminal voltage `v = ocv + r * i`; positive current (charging) raises it.
pub fn terminal_voltage(ocv_v: f64, r: f64, i: f64) -> f64 {
    ocv_v + r * i
}

/// Solves `r*i^2 + ocv*i - p_dc = 0` for the physical root with sign(i) = sign(p_dc).
///
/// `p_dc` is in watts. Uses the conjugate form when `|4*r*p_dc| << ocv^2`
/// to avoid cancellation at small powers.
pub fn current_from_dc_power(ocv_v: f64, r: f64, p_dc: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("resistance {r} must be positive")));
    }
    if !ocv_v.is_finite() || !p_dc.is_finite() {
        return Err(Error::Domain("non-finite input".into()));
    }
    if p_dc == 0.0 {
        return Ok(0.0);
    }
    let disc = ocv_v * ocv_v + 4.0 * r * p_dc;
    if disc <= 0.0 {
        return Err(Error::Domain(format!(
            "infeasible discharge power: {p_dc} W exceeds what the cell can deliver \
             (ocv {ocv_v} V, r {r} ohm)"
        )));
    }
    let i = if (4.0 * r * p_dc).abs() < 1e-3 * ocv_v * ocv_v {
        // conjugate form: i = 2*p_dc / (ocv + sqrt(disc))
        2.0 * p_dc / (ocv_v + disc.sqrt())
    } else {
        (-ocv_v + disc.sqrt()) / (2.0 * r)
    };
    Ok(i)
}

/// DC power at the terminals for current `i`: `v(i) * i` in watts.
pub fn dc_power(ocv_v: f64, r: f64, i: f64) -> f64 {
    terminal_voltage(ocv_v, r, i) * i
}

/// AC/DC converter model. The optimizer uses the constant mode; the digital
/// twin uses the curve mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InverterModel {
    Constant { eta: f64 },
    /// Efficiency eta(x) = x / (x + p0 + k*x^2) with x = |p_ac| / p_rated.
    /// `p0` is the standing loss and `k` the quadratic loss coefficient,
    /// both as fractions of rated power.
    Curve { p0: f64, k: f64 },
}

impl InverterModel {
    /// Representative default curve: efficiency peaks near 0.97 and collapses
    /// at a few percent load.
    pub fn default_curve() -> Self {
        InverterModel::Curve { p0: 0.005, k: 0.03 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InverterModel::Constant { eta } => {
                if eta > 0.0 && eta <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("inverter efficiency {eta} outside (0, 1]")))
                }
            }
            InverterModel::Curve { p0, k } => {
                if p0 >= 0.0 && k >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::Config("inverter curve coefficients must be nonnegative".into()))
                }
            }
        }
    }

    /// Efficiency at load fraction `x` in (0, 1].
    pub fn efficiency(&self, x: f64) -> f64 {
        match *self {
            InverterModel::Constant { eta } => eta,
            InverterModel::Curve { p0, k } => x / (x + p0 + k * x * x),
        }
    }
}

/// Converts an AC setpoint to the DC-side power, both in kW.
///
/// Charging (`p_ac > 0`): `p_dc = p_ac * eta`. Discharging: `p_dc = p_ac / eta`,
/// i.e. more DC power is drawn from the cell than reaches the grid.
pub fn inverter_dc_from_ac(p_ac: f64, model: &InverterModel, p_rated: f64) -> Result<f64> {
    if !p_ac.is_finite() {
        return Err(Error::Setpoint("non-finite AC setpoint".into()));
    }
    if p_ac.abs() > p_rated * (1.0 + 1e-12) {
        return Err(Error::Setpoint(format!(
            "|p_ac| = {} kW exceeds rated power {} kW",
            p_ac.abs(),
            p_rated
        )));
    }
    if p_ac == 0.0 {
        return Ok(0.0);
    }
    let eta = model.efficiency(p_ac.abs() / p_rated);
    if p_ac > 0.0 {
        Ok(p_ac * eta)
    } else {
        Ok(p_ac / eta)
    }
}

/// Inverse of [`inverter_dc_from_ac`]: the AC power corresponding to a realized
/// DC-side power. Needed by the twin to report clipped setpoints on the AC side.
pub fn inverter_ac_from_dc(p_dc: f64, model: &InverterModel, p_rated: f64) -> Result<f64> {
    if !p_dc.is_finite() {
        return Err(Error::Setpoint("non-finite DC power".into()));
    }
    if p_dc == 0.0 {
        return Ok(0.0);
    }
    match *model {
        InverterModel::Constant { eta } => {
            if p_dc > 0.0 {
                Ok(p_dc / eta)
            } else {
                Ok(p_dc * eta)
            }
        }
        InverterModel::Curve { p0, k } => {
            let y = p_dc.abs() / p_rated;
            if p_dc > 0.0 {
                // charge: y = x^2 / (x + p0 + k x^2)  =>  (1 - y k) x^2 - y x - y p0 = 0
                let a = 1.0 - y * k;
                let disc = y * y + 4.0 * a * y * p0;
                if a <= 0.0 || disc < 0.0 {
                    return Err(Error::Setpoint(format!(
                        "DC charge power {p_dc} kW not reachable through the inverter curve"
                    )));
                }
                let x = (y + disc.sqrt()) / (2.0 * a);
                Ok(x * p_rated)
            } else {
                // discharge: y = x + p0 + k x^2  =>  k x^2 + x + p0 - y = 0
                if y <= p0 {
                    // DC draw cannot even cover the standing loss: no AC output
                    return Ok(0.0);
                }
                let x = if k == 0.0 {
                    y - p0
                } else {
                    (-1.0 + (1.0 + 4.0 * k * (y - p0)).sqrt()) / (2.0 * k)
                };
                Ok(-x * p_rated)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simple_curve() -> OcvCurve {
        OcvCurve::new(vec![(0.0, 100.0), (0.5, 110.0), (1.0, 130.0)]).unwrap()
    }

    #[test]
    fn ocv_at_breakpoints_and_endpoints() {
        let c = simple_curve();
        assert_eq!(ocv(0.5, &c).unwrap(), 110.0);
        assert_eq!(ocv(0.0, &c).unwrap(), 100.0);
        assert_eq!(ocv(1.0, &c).unwrap(), 130.0);
    }

    #[test]
    fn ocv_linear_midpoint() {
        let c = simple_curve();
        assert_relative_eq!(ocv(0.25, &c).unwrap(), 105.0);
        assert_relative_eq!(ocv(0.75, &c).unwrap(), 120.0);
    }

    #[test]
    fn ocv_rejects_out_of_range() {
        let c = simple_curve();
        assert!(ocv(-0.01, &c).is_err());
        assert!(ocv(1.01, &c).is_err());
    }

    #[test]
    fn ocv_monotone_in_soc() {
        let c = OcvCurve::default_lfp();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let v = ocv(k as f64 / 1000.0, &c).unwrap();
            assert!(v > last, "OCV not strictly increasing at soc {}", k as f64 / 1000.0);
            last = v;
        }
    }

    #[test]
    fn resistance_scaling() {
        assert_eq!(effective_resistance(0.05, 1.0).unwrap(), 0.05);
        assert_relative_eq!(effective_resistance(0.05, 1.2).unwrap(), 0.06);
        assert!(effective_resistance(0.05, 0.9).is_err());
    }

    #[test]
    fn terminal_voltage_signs() {
        assert_eq!(terminal_voltage(100.0, 0.1, 0.0), 100.0);
        assert_relative_eq!(terminal_voltage(100.0, 0.1, 10.0), 101.0);
        assert_relative_eq!(terminal_voltage(100.0, 0.1, -10.0), 99.0);
    }

    #[test]
    fn current_from_power_examples() {
        assert_eq!(current_from_dc_power(100.0, 0.1, 0.0).unwrap(), 0.0);
        let i = current_from_dc_power(100.0, 0.1, 1000.0).unwrap();
        assert_relative_eq!(i, 9.901951, epsilon = 1e-5);
        // round trip
        assert_relative_eq!(dc_power(100.0, 0.1, i), 1000.0, max_relative = 1e-12);
        // discriminant boundary: 100^2 - 4*0.1*25000 = 0 -> degenerate, rejected
        assert!(current_from_dc_power(100.0, 0.1, -25_000.0).is_err());
        assert!(current_from_dc_power(100.0, 0.1, -26_000.0).is_err());
        assert!(current_from_dc_power(100.0, 0.1, -24_000.0).is_ok());
    }

    #[test]
    fn current_small_power_stability() {
        // near-zero powers must not suffer cancellation
        let i = current_from_dc_power(700.0, 0.1, 1e-6).unwrap();
        assert_relative_eq!(dc_power(700.0, 0.1, i), 1e-6, max_relative = 1e-9);
    }

    #[test]
    fn current_monotone_in_power() {
        let mut last = f64::NEG_INFINITY;
        for k in -100..=100 {
            let p = k as f64 * 500.0;
            let i = current_from_dc_power(700.0, 0.12, p).unwrap();
            assert!(i > last);
            last = i;
        }
    }

    #[test]
    fn resistive_loss_positivity() {
        for &i in &[-50.0, -1.0, 1.0, 50.0] {
            let loss = dc_power(700.0, 0.1, i) - 700.0 * i;
            assert_relative_eq!(loss, 0.1 * i * i, max_relative = 1e-12);
            assert!(loss > 0.0);
        }
    }

    #[test]
    fn inverter_constant_mode() {
        let m = InverterModel::Constant { eta: 0.95 };
        assert_eq!(inverter_dc_from_ac(0.0, &m, 80.0).unwrap(), 0.0);
        assert_relative_eq!(inverter_dc_from_ac(80.0, &m, 80.0).unwrap(), 76.0);
        assert_relative_eq!(inverter_dc_from_ac(-76.0, &m, 80.0).unwrap(), -80.0);
        assert!(inverter_dc_from_ac(81.0, &m, 80.0).is_err());
    }

    #[test]
    fn inverter_curve_shape() {
        let m = InverterModel::default_curve();
        let (p0, k) = match m {
            InverterModel::Curve { p0, k } => (p0, k),
            _ => unreachable!(),
        };
        let x_star = (p0 / k).sqrt();
        let eta_star = m.efficiency(x_star);
        assert!(eta_star > 0.96 && eta_star < 0.99, "peak efficiency {eta_star}");
        // dense sweep: eta <= 1 everywhere, maximal at x*
        for j in 1..=1000 {
            let x = j as f64 / 1000.0;
            let e = m.efficiency(x);
            assert!(e <= 1.0);
            assert!(e <= eta_star + 1e-12, "eta({x}) = {e} exceeds peak {eta_star}");
        }
        // collapses at very low load
        assert!(m.efficiency(0.04) < 0.9);
    }

    #[test]
    fn inverter_curve_round_trip() {
        let m = InverterModel::default_curve();
        for &p_ac in &[-80.0, -40.0, -5.0, 5.0, 40.0, 80.0] {
            let p_dc = inverter_dc_from_ac(p_ac, &m, 80.0).unwrap();
            let back = inverter_ac_from_dc(p_dc, &m, 80.0).unwrap();
            assert_relative_eq!(back, p_ac, max_relative = 1e-9);
        }
    }

    #[test]
    fn curve_from_table_text() {
        let c = OcvCurve::from_table("# soc volts\n0.0 100\n0.5, 110\n1.0 130\n").unwrap();
        assert_eq!(c, simple_curve());
        assert!(OcvCurve::from_table("0.0 100\n1.0").is_err());
        assert!(OcvCurve::from_table("0.0 100\n0.5 90\n1.0 130").is_err());
    }
}
