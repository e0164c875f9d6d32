//! Optimal operation when users are spread with one density everywhere.
//!
//! With equal densities the cells closest to the macro BS are the cheapest to
//! hand over, so the optimal mode puts a distance-ordered prefix to sleep. The
//! prefix grows while the extra macro consumption of the next cell stays below
//! the saving `Δp = p1 − p0` and the macro transmit cap holds.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::power_model::{evaluate_with, Evaluation, ModelTerms, OperationMode};
use crate::roots::{solve_increasing, BracketPolicy};
use crate::scenario::{distance_order, is_uniform, sbs_distances, Scenario, UNIFORM_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct UniformSolution {
    pub mode: OperationMode,
    /// Number of cells put to sleep, `min(m_th1, m_th2)`.
    pub m_th: usize,
    /// Stopping index from the marginal-saving test.
    pub m_th1: usize,
    /// Stopping index from the transmit-power cap.
    pub m_th2: usize,
    /// Cell indices sorted by distance to the macro BS.
    pub order: Vec<usize>,
    /// `ΔP_m` for m = 1..=M in distance order.
    pub delta_p_macro: Vec<f64>,
    pub eval: Evaluation,
}

pub fn solve_uniform(s: &Scenario) -> Result<UniformSolution> {
    if !is_uniform(s, UNIFORM_TOL) {
        return Err(Error::contract("location-based operation requires equal user densities"));
    }
    let m = s.num_cells();
    let terms = ModelTerms::new(s);
    let order = distance_order(s);

    let prefix: Vec<Evaluation> = (0..=m)
        .map(|k| evaluate_with(&terms, &OperationMode::prefix_off(m, &order, k)))
        .collect();
    if !prefix[0].feasible {
        return Err(Error::Infeasible(format!(
            "all-on transmit power {:.6} W exceeds the {} W cap",
            prefix[0].p_t, s.power.p_t_max
        )));
    }
    let delta_p_macro: Vec<f64> = prefix
        .windows(2)
        .map(|w| terms.u * (w[1].p_t - w[0].p_t))
        .collect();

    // ΔP_m == Δp counts as "no saving": stop.
    let m_th1 = delta_p_macro
        .iter()
        .position(|&d| d >= terms.delta_p)
        .unwrap_or(m);
    let m_th2 = prefix[1..]
        .iter()
        .position(|e| !e.feasible)
        .unwrap_or(m);
    let m_th = m_th1.min(m_th2);
    let mode = OperationMode::prefix_off(m, &order, m_th);
    let eval = prefix[m_th];
    Ok(UniformSolution {
        mode,
        m_th,
        m_th1,
        m_th2,
        order,
        delta_p_macro,
        eval,
    })
}

/// `f(x) = uΓN0W / (−D ln(1−ε) r0^α) · (exp((2^(b/W) − 1)x) − 1)/x`.
pub fn f_helper(s: &Scenario, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::DegenerateLoad);
    }
    Ok(ModelTerms::new(s).f(x))
}

/// Limit of [`f_helper`] as the user count goes to zero.
pub fn f_helper_limit(s: &Scenario) -> f64 {
    let t = ModelTerms::new(s);
    t.f_prefactor() * t.q
}

/// `2π/(α+2) (R0^(α+2) + α r0^(α+2)/2)`, the macro path-loss integral per unit density.
fn macro_geometry(s: &Scenario) -> f64 {
    let a = s.channel.alpha;
    2.0 * PI / (a + 2.0) * (s.r_macro.powf(a + 2.0) + a * s.channel.r0.powf(a + 2.0) / 2.0)
}

fn sorted_distances(s: &Scenario) -> Result<Vec<f64>> {
    if s.num_cells() == 0 {
        return Err(Error::contract("density thresholds need at least one small cell"));
    }
    let mut d = sbs_distances(s);
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Extra macro consumption of waking the farthest cell from the all-asleep
/// state, as a function of the common density.
pub fn h_all_off(s: &Scenario, lambda: f64) -> Result<f64> {
    let d = sorted_distances(s)?;
    let terms = ModelTerms::new(s);
    let a = s.channel.alpha;
    let r2 = s.r_macro * s.r_macro;
    let rs2 = s.r_small * s.r_small;
    let g = macro_geometry(s);
    let far = *d.last().unwrap();
    let f_full = terms.f(lambda * PI * r2);
    let f_less = terms.f(lambda * PI * (r2 - rs2));
    Ok(lambda * g * (f_full - f_less) + lambda * PI * rs2 * far.powf(a) * f_less)
}

/// Extra macro consumption of putting the closest cell to sleep from the
/// all-active state, as a function of the common density.
pub fn h_all_on(s: &Scenario, lambda: f64) -> Result<f64> {
    let d = sorted_distances(s)?;
    let terms = ModelTerms::new(s);
    let a = s.channel.alpha;
    let m = d.len() as f64;
    let r2 = s.r_macro * s.r_macro;
    let rs2 = s.r_small * s.r_small;
    let g = macro_geometry(s);
    let rest: f64 = d[1..].iter().map(|x| x.powf(a)).sum();
    let f_one_off = terms.f(lambda * PI * (r2 - (m - 1.0) * rs2));
    let f_all_on = terms.f(lambda * PI * (r2 - m * rs2));
    Ok((lambda * g - lambda * PI * rs2 * rest) * (f_one_off - f_all_on)
        + f_all_on * lambda * PI * rs2 * d[0].powf(a))
}

/// Density below which every cell sleeps (no transmit cap).
pub fn threshold_lambda_off(s: &Scenario) -> Result<f64> {
    sorted_distances(s)?;
    let dp = s.power.delta_p();
    solve_increasing(|l| h_all_off(s, l).unwrap_or(f64::NAN), dp, &BracketPolicy::default())
}

/// Density above which every cell stays active (no transmit cap).
pub fn threshold_lambda_on(s: &Scenario) -> Result<f64> {
    sorted_distances(s)?;
    let dp = s.power.delta_p();
    solve_increasing(|l| h_all_on(s, l).unwrap_or(f64::NAN), dp, &BracketPolicy::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ChannelParams, PowerParams, QosParams};

    fn uniform4(lambda: f64) -> Scenario {
        Scenario {
            r_macro: 500.0,
            r_small: 20.0,
            sbs_positions: vec![[100.0, 0.0], [0.0, 200.0], [-300.0, 0.0], [0.0, -400.0]],
            lambda0: lambda,
            lambdas: vec![lambda; 4],
            channel: ChannelParams::reference(),
            qos: QosParams::reference(),
            power: PowerParams::reference(),
        }
    }

    #[test]
    fn rejects_non_uniform() {
        let mut s = uniform4(1e-3);
        s.lambdas[2] = 2e-3;
        assert!(matches!(solve_uniform(&s), Err(Error::Contract(_))));
    }

    #[test]
    fn huge_sleep_saving_turns_everything_off() {
        let mut s = uniform4(1e-3);
        s.power.p_sbs_active = 1e6;
        s.power.p_t_max = f64::INFINITY;
        let sol = solve_uniform(&s).unwrap();
        assert_eq!(sol.m_th, 4);
        assert_eq!(sol.mode, OperationMode::all_off(4));
    }

    #[test]
    fn infeasible_all_on_is_reported() {
        let mut s = uniform4(1e-3);
        s.power.p_t_max = 1e-6;
        assert!(matches!(solve_uniform(&s), Err(Error::Infeasible(_))));
    }

    #[test]
    fn f_limit_and_degenerate() {
        let s = uniform4(1e-3);
        assert!(matches!(f_helper(&s, 0.0), Err(Error::DegenerateLoad)));
        let lim = f_helper_limit(&s);
        let near = f_helper(&s, 1e-9).unwrap();
        assert!((near / lim - 1.0).abs() < 1e-9);
    }

    #[test]
    fn thresholds_need_cells() {
        let mut s = uniform4(1e-3);
        s.sbs_positions.clear();
        s.lambdas.clear();
        assert!(threshold_lambda_off(&s).is_err());
        assert!(threshold_lambda_on(&s).is_err());
    }
}
