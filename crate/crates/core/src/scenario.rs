//! Problem instance: macro-cell geometry, small-cell layout, user densities,
//! channel, QoS and power-consumption parameters.
//!
//! All quantities held by [`Scenario`] are in linear SI units (W, W/Hz, m,
//! users/m²). Decibel values only exist in the JSON file representation
//! ([`ScenarioFile`]) and are converted on load/save.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for [`is_uniform`].
pub const UNIFORM_TOL: f64 = 1e-9;

/// Relative slack applied to the geometric containment/disjointness checks so
/// that layouts whose discs exactly touch are accepted.
const GEOMETRY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Reference path loss `D` (linear gain).
    pub d_ref_loss: f64,
    /// Reference distance `r0` in meters.
    pub r0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Noise power density in W/Hz.
    pub n0: f64,
    /// Capacity-loss factor `Γ ≥ 1`.
    pub gamma_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosParams {
    /// Per-user required rate in bit/s.
    pub rate_b: f64,
    /// Maximum outage probability.
    pub epsilon: f64,
    /// Macro-cell bandwidth in Hz.
    pub bandwidth_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    /// Macro base-station static power in W.
    pub p_base_macro: f64,
    /// Slope of macro power consumption versus transmit power.
    pub u_slope: f64,
    /// Maximum macro transmit power in W.
    pub p_t_max: f64,
    /// Small-cell consumption when active, in W.
    pub p_sbs_active: f64,
    /// Small-cell consumption when sleeping, in W.
    pub p_sbs_sleep: f64,
}

impl ChannelParams {
    /// D = -35 dB, r0 = 1 m, α = 2.5, N0 = -174 dBm/Hz, Γ = 1.
    pub fn reference() -> Self {
        Self {
            d_ref_loss: db_to_linear(-35.0),
            r0: 1.0,
            alpha: 2.5,
            n0: dbm_hz_to_w_hz(-174.0),
            gamma_cap: 1.0,
        }
    }
}

impl QosParams {
    /// b = 0.1 Mbit/s, ε = 0.05, W = 10 MHz.
    pub fn reference() -> Self {
        Self {
            rate_b: 1e5,
            epsilon: 0.05,
            bandwidth_w: 1e7,
        }
    }
}

impl PowerParams {
    /// 712 W base, slope 14.5, 40 W max transmit, 10 W / 3 W small-cell states.
    pub fn reference() -> Self {
        Self {
            p_base_macro: 712.0,
            u_slope: 14.5,
            p_t_max: 40.0,
            p_sbs_active: 10.0,
            p_sbs_sleep: 3.0,
        }
    }

    /// Power saved by putting one small cell to sleep.
    pub fn delta_p(&self) -> f64 {
        self.p_sbs_active - self.p_sbs_sleep
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Macro-cell radius `R0` in meters (macro BS at the origin).
    pub r_macro: f64,
    /// Small-cell radius `R_s` in meters.
    pub r_small: f64,
    /// Small-cell centers in meters.
    pub sbs_positions: Vec<[f64; 2]>,
    /// User density outside all small cells, users/m².
    pub lambda0: f64,
    /// User density inside each small cell, users/m².
    pub lambdas: Vec<f64>,
    pub channel: ChannelParams,
    pub qos: QosParams,
    pub power: PowerParams,
}

impl Scenario {
    /// Number of small cells.
    pub fn num_cells(&self) -> usize {
        self.sbs_positions.len()
    }

    /// Area of one small cell, `πR_s²`.
    pub fn cell_area(&self) -> f64 {
        PI * self.r_small * self.r_small
    }

    /// Area outside all small cells, `πR0² − MπR_s²`.
    pub fn open_area(&self) -> f64 {
        PI * self.r_macro * self.r_macro - self.num_cells() as f64 * self.cell_area()
    }

    /// Checks every structural invariant and returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_cells();
        if !(self.r_small.is_finite() && self.r_small > 0.0) {
            return Err(Error::validation(format!(
                "small-cell radius must be positive, got {}",
                self.r_small
            )));
        }
        if !(self.r_macro.is_finite() && self.r_small < self.r_macro) {
            return Err(Error::validation(format!(
                "small-cell radius {} must be smaller than macro radius {}",
                self.r_small, self.r_macro
            )));
        }
        if self.lambdas.len() != m {
            return Err(Error::validation(format!(
                "{} small-cell densities given for {} small cells",
                self.lambdas.len(),
                m
            )));
        }
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(Error::validation(format!(
                "macro user density must be positive, got {}",
                self.lambda0
            )));
        }
        for (i, &l) in self.lambdas.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::validation(format!(
                    "density of small cell {i} must be positive, got {l}"
                )));
            }
        }

        let contain_limit = self.r_macro * (1.0 + GEOMETRY_SLACK);
        for (i, p) in self.sbs_positions.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::validation(format!("small cell {i} has a non-finite position")));
            }
            let d = p[0].hypot(p[1]);
            if d == 0.0 {
                return Err(Error::validation(format!(
                    "small cell {i} is co-located with the macro base station"
                )));
            }
            if d + self.r_small > contain_limit {
                return Err(Error::validation(format!(
                    "small cell {i} at distance {d} with radius {} leaves the macro cell of radius {}",
                    self.r_small, self.r_macro
                )));
            }
        }
        let min_sep = 2.0 * self.r_small * (1.0 - GEOMETRY_SLACK);
        for i in 0..m {
            for j in (i + 1)..m {
                let a = self.sbs_positions[i];
                let b = self.sbs_positions[j];
                let sep = (a[0] - b[0]).hypot(a[1] - b[1]);
                if sep < min_sep {
                    return Err(Error::validation(format!(
                        "small cells {i} and {j} overlap: centers {sep} m apart, need at least {}",
                        2.0 * self.r_small
                    )));
                }
            }
        }

        let ch = &self.channel;
        if !(ch.d_ref_loss > 0.0 && ch.d_ref_loss.is_finite()) {
            return Err(Error::validation("reference path loss must be positive"));
        }
        if !(ch.r0 > 0.0 && ch.r0.is_finite()) {
            return Err(Error::validation("reference distance must be positive"));
        }
        if !(ch.alpha > 0.0 && ch.alpha.is_finite()) {
            return Err(Error::validation("path-loss exponent must be positive"));
        }
        if !(ch.n0 > 0.0 && ch.n0.is_finite()) {
            return Err(Error::validation("noise power density must be positive"));
        }
        if !(ch.gamma_cap >= 1.0 && ch.gamma_cap.is_finite()) {
            return Err(Error::validation("capacity-loss factor must be at least 1"));
        }

        let q = &self.qos;
        if !(q.epsilon > 0.0 && q.epsilon < 1.0) {
            return Err(Error::validation("outage probability must lie in (0, 1)"));
        }
        if !(q.rate_b > 0.0 && q.rate_b.is_finite()) {
            return Err(Error::validation("required rate must be positive"));
        }
        if !(q.bandwidth_w > 0.0 && q.bandwidth_w.is_finite()) {
            return Err(Error::validation("bandwidth must be positive"));
        }

        let pw = &self.power;
        if !(pw.p_base_macro > 0.0) {
            return Err(Error::validation("macro base power must be positive"));
        }
        if !(pw.u_slope > 0.0) {
            return Err(Error::validation("macro power slope must be positive"));
        }
        if !(pw.p_t_max > 0.0) {
            return Err(Error::validation("maximum transmit power must be positive"));
        }
        if !(pw.p_sbs_sleep >= 0.0 && pw.p_sbs_active > pw.p_sbs_sleep) {
            return Err(Error::validation(
                "small-cell active power must exceed sleeping power, which must be non-negative",
            ));
        }
        Ok(())
    }

    /// Copy of this scenario with new densities, re-validated.
    pub fn with_densities(&self, lambda0: f64, lambdas: Vec<f64>) -> Result<Scenario> {
        let s = Scenario {
            lambda0,
            lambdas,
            ..self.clone()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            geometry: GeometrySection {
                r_macro_m: self.r_macro,
                r_small_m: self.r_small,
                sbs_positions_m: self.sbs_positions.clone(),
            },
            densities: DensitySection {
                lambda0_per_m2: self.lambda0,
                lambdas_per_m2: self.lambdas.clone(),
            },
            channel: ChannelSection {
                d_db: linear_to_db(self.channel.d_ref_loss),
                r0_m: self.channel.r0,
                alpha: self.channel.alpha,
                n0_dbm_hz: w_hz_to_dbm_hz(self.channel.n0),
                gamma: self.channel.gamma_cap,
            },
            qos: QosSection {
                rate_bps: self.qos.rate_b,
                epsilon: self.qos.epsilon,
                bandwidth_hz: self.qos.bandwidth_w,
            },
            power: PowerSection {
                p_base_w: self.power.p_base_macro,
                u: self.power.u_slope,
                p_t_max_w: self.power.p_t_max,
                p_sbs_active_w: self.power.p_sbs_active,
                p_sbs_sleep_w: self.power.p_sbs_sleep,
            },
        }
    }
}

/// JSON representation of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub geometry: GeometrySection,
    pub densities: DensitySection,
    pub channel: ChannelSection,
    pub qos: QosSection,
    pub power: PowerSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub r_macro_m: f64,
    pub r_small_m: f64,
    pub sbs_positions_m: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySection {
    pub lambda0_per_m2: f64,
    pub lambdas_per_m2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub d_db: f64,
    pub r0_m: f64,
    pub alpha: f64,
    pub n0_dbm_hz: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSection {
    pub rate_bps: f64,
    pub epsilon: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub p_base_w: f64,
    pub u: f64,
    pub p_t_max_w: f64,
    pub p_sbs_active_w: f64,
    pub p_sbs_sleep_w: f64,
}

impl ScenarioFile {
    /// Converts to linear units and validates.
    pub fn into_scenario(self) -> Result<Scenario> {
        let s = Scenario {
            r_macro: self.geometry.r_macro_m,
            r_small: self.geometry.r_small_m,
            sbs_positions: self.geometry.sbs_positions_m,
            lambda0: self.densities.lambda0_per_m2,
            lambdas: self.densities.lambdas_per_m2,
            channel: ChannelParams {
                d_ref_loss: db_to_linear(self.channel.d_db),
                r0: self.channel.r0_m,
                alpha: self.channel.alpha,
                n0: dbm_hz_to_w_hz(self.channel.n0_dbm_hz),
                gamma_cap: self.channel.gamma,
            },
            qos: QosParams {
                rate_b: self.qos.rate_bps,
                epsilon: self.qos.epsilon,
                bandwidth_w: self.qos.bandwidth_hz,
            },
            power: PowerParams {
                p_base_macro: self.power.p_base_w,
                u_slope: self.power.u,
                p_t_max: self.power.p_t_max_w,
                p_sbs_active: self.power.p_sbs_active_w,
                p_sbs_sleep: self.power.p_sbs_sleep_w,
            },
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn parse_scenario(json: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(json)?;
    file.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&s.to_file())?;
    fs::write(path, text)?;
    Ok(())
}

/// True iff every small-cell density equals `lambda0` within relative `tol`.
pub fn is_uniform(s: &Scenario, tol: f64) -> bool {
    s.lambdas
        .iter()
        .all(|&l| (l - s.lambda0).abs() <= tol * s.lambda0.abs())
}

/// Distances `d_m = |x_m|` from the macro base station, in input order.
pub fn sbs_distances(s: &Scenario) -> Vec<f64> {
    s.sbs_positions.iter().map(|p| p[0].hypot(p[1])).collect()
}

/// Cell indices sorted by distance ascending; ties keep input order.
pub fn distance_order(s: &Scenario) -> Vec<usize> {
    let d = sbs_distances(s);
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    order
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_hz_to_w_hz(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_hz_to_dbm_hz(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cells(sep: f64) -> Scenario {
        Scenario {
            r_macro: 500.0,
            r_small: 20.0,
            sbs_positions: vec![[100.0, 0.0], [100.0 + sep, 0.0]],
            lambda0: 1e-3,
            lambdas: vec![1e-3, 1e-3],
            channel: ChannelParams::reference(),
            qos: QosParams::reference(),
            power: PowerParams::reference(),
        }
    }

    const REFERENCE_JSON: &str = r#"{
        "geometry": {"r_macro_m": 500, "r_small_m": 20,
                     "sbs_positions_m": [[100, 0], [0, 200]]},
        "densities": {"lambda0_per_m2": 1e-3, "lambdas_per_m2": [5e-3, 2e-2]},
        "channel": {"d_db": -35, "r0_m": 1, "alpha": 2.5, "n0_dbm_hz": -174, "gamma": 1},
        "qos": {"rate_bps": 1e5, "epsilon": 0.05, "bandwidth_hz": 1e7},
        "power": {"p_base_w": 712, "u": 14.5, "p_t_max_w": 40,
                  "p_sbs_active_w": 10, "p_sbs_sleep_w": 3}
    }"#;

    #[test]
    fn reference_file_parses_to_linear_units() {
        let s = parse_scenario(REFERENCE_JSON).unwrap();
        assert_eq!(s.num_cells(), 2);
        assert!((s.channel.d_ref_loss - 10f64.powf(-3.5)).abs() < 1e-18);
        assert!((s.channel.n0 / 3.981_071_705_534_97e-21 - 1.0).abs() < 1e-12);
        assert_eq!(s.channel.gamma_cap, 1.0);
        assert_eq!(s.power.p_base_macro, 712.0);
        assert_eq!(s.power.u_slope, 14.5);
        assert_eq!(s.power.p_t_max, 40.0);
        assert_eq!(s.channel, ChannelParams::reference());
    }

    #[test]
    fn overlapping_cells_are_rejected() {
        let s = two_cells(1.5 * 20.0);
        let err = s.validate().unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("overlap")), "{err}");
        assert!(two_cells(40.0).validate().is_ok());
    }

    #[test]
    fn cell_leaving_macro_is_rejected() {
        let mut s = two_cells(100.0);
        s.sbs_positions[0] = [500.0, 0.0];
        let err = s.validate().unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("leaves")), "{err}");
    }

    #[test]
    fn origin_and_density_violations() {
        let mut s = two_cells(100.0);
        s.sbs_positions[0] = [0.0, 0.0];
        assert!(s.validate().is_err());

        let mut s = two_cells(100.0);
        s.lambdas.pop();
        assert!(s.validate().is_err());

        let mut s = two_cells(100.0);
        s.lambdas[1] = 0.0;
        assert!(s.validate().is_err());

        let mut s = two_cells(100.0);
        s.power.p_sbs_sleep = 10.0;
        assert!(s.validate().is_err());

        let mut s = two_cells(100.0);
        s.qos.epsilon = 1.0;
        assert!(s.validate().is_err());

        let mut s = two_cells(100.0);
        s.channel.gamma_cap = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(parse_scenario("{\"geometry\": 3}"), Err(Error::Parse(_))));
        assert!(matches!(parse_scenario("not json"), Err(Error::Parse(_))));
    }

    #[test]
    fn uniformity_detection() {
        let mut s = two_cells(100.0);
        assert!(is_uniform(&s, UNIFORM_TOL));
        s.lambdas[0] = 5e-2;
        assert!(!is_uniform(&s, UNIFORM_TOL));
        s.lambdas[0] = 1e-3 * (1.0 + UNIFORM_TOL / 2.0);
        assert!(is_uniform(&s, UNIFORM_TOL));
    }

    #[test]
    fn distances() {
        let mut s = two_cells(100.0);
        s.sbs_positions = vec![[3.0, 4.0], [250.0, 0.0]];
        assert_eq!(sbs_distances(&s), vec![5.0, 250.0]);
        s.sbs_positions.clear();
        s.lambdas.clear();
        assert!(sbs_distances(&s).is_empty());
    }

    #[test]
    fn distance_ties_break_by_index() {
        let mut s = two_cells(100.0);
        s.sbs_positions = vec![[0.0, 300.0], [100.0, 0.0], [300.0, 0.0]];
        s.lambdas = vec![1e-3; 3];
        assert_eq!(distance_order(&s), vec![1, 0, 2]);
    }
}
