//! Analytic macro transmit power and total network power for a given
//! small-cell operation mode.
//!
//! The macro transmit power factors into a traffic term that grows
//! exponentially with the expected number of macro-served users `μ` and an
//! efficiency term, the average per-user path-loss compensation:
//!
//! ```text
//! P^t(θ) = T(θ) · Z(θ)
//! T(θ)   = c · (exp(q μ) − 1),           c = ΓN0W / (−D ln(1−ε)),  q = 2^(b/W) − 1
//! Z(θ)   = N(θ) / (r0^α μ)
//! N(θ)   = 2πλ0/(α+2) (R0^(α+2) + α r0^(α+2)/2) − λ0 Σ_m πR_s² d_m^α + Σ_{θ_m=0} λ_m πR_s² d_m^α
//! ```
//!
//! The small-cell path-loss integrals are taken as `πR_s² d_m^α`, i.e. the
//! path loss at the disc center. The exact integral lives in
//! [`crate::validation`] and is only used to audit this shortcut.

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{distance_order, sbs_distances, Scenario};

/// Binary on/off vector over the small cells; `true` is active.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OperationMode(Vec<bool>);

impl OperationMode {
    pub fn new(theta: Vec<bool>) -> Self {
        Self(theta)
    }

    pub fn all_on(m: usize) -> Self {
        Self(vec![true; m])
    }

    pub fn all_off(m: usize) -> Self {
        Self(vec![false; m])
    }

    /// Mode with the first `k` cells of `order` asleep and every other cell active.
    pub fn prefix_off(m: usize, order: &[usize], k: usize) -> Self {
        let mut theta = vec![true; m];
        for &i in &order[..k] {
            theta[i] = false;
        }
        Self(theta)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, active: bool) {
        self.0[i] = active;
    }

    /// Number of active cells, `H(θ)`.
    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&a| a).count()
    }

    pub fn sleeping(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &a)| !a).map(|(i, _)| i)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    /// Elementwise `self ≤ other` (every cell active here is active there).
    pub fn is_dominated_by(&self, other: &OperationMode) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for OperationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &a in &self.0 {
            f.write_str(if a { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for OperationMode {
    type Err = Error;

    fn from_str(bits: &str) -> Result<Self> {
        bits.chars()
            .filter(|c| !matches!(c, ',' | ' ' | '_'))
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::validation(format!(
                    "operation mode must be a string of 0/1, found {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(OperationMode)
    }
}

impl Serialize for OperationMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Full power evaluation of one operation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    /// Macro transmit power `P^t(θ)` in W.
    pub p_t: f64,
    /// `T(θ)` in W.
    pub traffic_factor: f64,
    /// `Z(θ)`; zero when no users are macro-served.
    pub efficiency_factor: f64,
    /// Total network power in W.
    pub p_het: f64,
    /// `p_t ≤ P^t_max`.
    pub feasible: bool,
    /// Expected number of macro-served users.
    pub mu: f64,
}

impl Evaluation {
    /// `P̲ + u·P^t`, the macro base station's consumption.
    pub fn mbs_power(&self, s: &Scenario) -> f64 {
        s.power.p_base_macro + s.power.u_slope * self.p_t
    }

    /// Consumption of all small cells.
    pub fn sbs_power(&self, s: &Scenario) -> f64 {
        self.p_het - self.mbs_power(s)
    }
}

/// Scenario constants shared by every mode evaluation.
#[derive(Debug, Clone)]
pub struct ModelTerms {
    /// `ΓN0W / (−D ln(1−ε))` in W.
    pub c_tx: f64,
    /// `2^(b/W) − 1`.
    pub q: f64,
    /// `r0^α`.
    pub r0_alpha: f64,
    /// `2πλ0/(α+2) (R0^(α+2) + α r0^(α+2)/2)`.
    pub macro_term: f64,
    /// Expected users outside all small cells, `λ0(πR0² − MπR_s²)`.
    pub base_load: f64,
    /// `macro_term − λ0 Σ_m πR_s² d_m^α`.
    pub upsilon: f64,
    /// Expected users of each cell, `λ_m πR_s²`.
    pub cell_load: Vec<f64>,
    /// `λ_m πR_s² d_m^α`.
    pub cell_weight: Vec<f64>,
    /// `πR_s² d_m^α`.
    pub cell_geometry: Vec<f64>,
    pub u: f64,
    pub delta_p: f64,
    /// `P̲ + M p0`.
    pub fixed_power: f64,
    pub p_t_max: f64,
}

impl ModelTerms {
    pub fn new(s: &Scenario) -> Self {
        let ch = &s.channel;
        let qos = &s.qos;
        let area = s.cell_area();
        let alpha = ch.alpha;
        let d = sbs_distances(s);
        let cell_geometry: Vec<f64> = d.iter().map(|&d| area * d.powf(alpha)).collect();
        let macro_term = 2.0 * PI * s.lambda0 / (alpha + 2.0)
            * (s.r_macro.powf(alpha + 2.0) + alpha * ch.r0.powf(alpha + 2.0) / 2.0);
        let geometry_sum: f64 = cell_geometry.iter().sum();
        Self {
            c_tx: ch.gamma_cap * ch.n0 * qos.bandwidth_w
                / (-ch.d_ref_loss * (-qos.epsilon).ln_1p()),
            q: (qos.rate_b / qos.bandwidth_w * LN_2).exp_m1(),
            r0_alpha: ch.r0.powf(alpha),
            macro_term,
            base_load: s.lambda0 * s.open_area(),
            upsilon: macro_term - s.lambda0 * geometry_sum,
            cell_load: s.lambdas.iter().map(|&l| l * area).collect(),
            cell_weight: s.lambdas.iter().zip(&cell_geometry).map(|(&l, &g)| l * g).collect(),
            cell_geometry,
            u: s.power.u_slope,
            delta_p: s.power.delta_p(),
            fixed_power: s.power.p_base_macro + s.num_cells() as f64 * s.power.p_sbs_sleep,
            p_t_max: s.power.p_t_max,
        }
    }

    /// `T` for a given expected macro user count.
    pub fn traffic(&self, mu: f64) -> f64 {
        self.c_tx * (self.q * mu).exp_m1()
    }

    /// Macro transmit power given the load and path-loss weight handed over
    /// by sleeping cells.
    pub fn p_t(&self, sleeping_load: f64, sleeping_weight: f64) -> f64 {
        let mu = self.base_load + sleeping_load;
        if mu <= 0.0 {
            return 0.0;
        }
        self.traffic(mu) * ((self.upsilon + sleeping_weight) / (self.r0_alpha * mu))
    }

    /// Total network power given the sleeping load/weight and active count.
    pub fn p_het(&self, sleeping_load: f64, sleeping_weight: f64, active: usize) -> f64 {
        self.fixed_power + self.u * self.p_t(sleeping_load, sleeping_weight) + active as f64 * self.delta_p
    }

    /// Prefactor of the per-user power helper, `uΓN0W / (−D ln(1−ε) r0^α)`.
    pub fn f_prefactor(&self) -> f64 {
        self.u * self.c_tx / self.r0_alpha
    }

    /// Per-user macro power helper `f(x) = k (exp(qx) − 1)/x`, continuous at 0.
    pub fn f(&self, x: f64) -> f64 {
        let k = self.f_prefactor();
        if x == 0.0 {
            k * self.q
        } else {
            k * (self.q * x).exp_m1() / x
        }
    }

    pub fn sleeping_sums(&self, mode: &OperationMode) -> (f64, f64) {
        mode.sleeping().fold((0.0, 0.0), |(l, w), i| {
            (l + self.cell_load[i], w + self.cell_weight[i])
        })
    }
}

fn check_mode(s: &Scenario, mode: &OperationMode) {
    assert_eq!(
        mode.len(),
        s.num_cells(),
        "operation mode covers {} cells, scenario has {}",
        mode.len(),
        s.num_cells()
    );
}

/// Expected number of macro-served users `μ(θ)`.
pub fn expected_macro_users(s: &Scenario, mode: &OperationMode) -> f64 {
    check_mode(s, mode);
    let terms = ModelTerms::new(s);
    terms.base_load + terms.sleeping_sums(mode).0
}

/// Transmit power that meets the rate/outage target of one user at distance
/// `r_k` when `k_users` share the band equally.
pub fn per_user_tx_power(s: &Scenario, r_k: f64, k_users: u64) -> Result<f64> {
    if k_users == 0 {
        return Err(Error::contract("user count must be at least 1"));
    }
    if !(r_k >= 0.0) {
        return Err(Error::contract(format!("distance must be non-negative, got {r_k}")));
    }
    let terms = ModelTerms::new(s);
    let k = k_users as f64;
    let rate_term = (k * s.qos.rate_b * LN_2 / s.qos.bandwidth_w).exp_m1() / k;
    let value = terms.c_tx * rate_term * path_gain_inverse(s, r_k);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Overflow { users: k_users })
    }
}

/// `g(r) = max(1, (r/r0)^α)`, the inverse of the distance-dependent gain.
pub fn path_gain_inverse(s: &Scenario, r: f64) -> f64 {
    let r0 = s.channel.r0;
    if r < r0 {
        1.0
    } else {
        (r / r0).powf(s.channel.alpha)
    }
}

pub fn traffic_factor(s: &Scenario, mode: &OperationMode) -> f64 {
    check_mode(s, mode);
    let terms = ModelTerms::new(s);
    terms.traffic(terms.base_load + terms.sleeping_sums(mode).0)
}

pub fn efficiency_factor(s: &Scenario, mode: &OperationMode) -> Result<f64> {
    check_mode(s, mode);
    let terms = ModelTerms::new(s);
    let (load, weight) = terms.sleeping_sums(mode);
    let mu = terms.base_load + load;
    if mu <= 0.0 {
        return Err(Error::DegenerateLoad);
    }
    Ok((terms.upsilon + weight) / (terms.r0_alpha * mu))
}

/// `T(θ)` specialised to equal densities everywhere (uses `λ0` only).
pub fn traffic_factor_uniform(s: &Scenario, mode: &OperationMode) -> f64 {
    check_mode(s, mode);
    let terms = ModelTerms::new(s);
    let h = mode.active_count() as f64;
    let r0 = s.r_macro;
    let rs = s.r_small;
    terms.c_tx * ((terms.q * s.lambda0 * PI * (r0 * r0 - h * rs * rs)).exp_m1())
}

/// `Z(θ)` specialised to equal densities everywhere (uses `λ0` only).
pub fn efficiency_factor_uniform(s: &Scenario, mode: &OperationMode) -> f64 {
    check_mode(s, mode);
    let alpha = s.channel.alpha;
    let r0 = s.channel.r0;
    let rm = s.r_macro;
    let rs = s.r_small;
    let d = sbs_distances(s);
    let active_sum: f64 = (0..d.len())
        .filter(|&i| mode.is_active(i))
        .map(|i| d[i].powf(alpha))
        .sum();
    let h = mode.active_count() as f64;
    let num = 2.0 * PI / (alpha + 2.0) * (rm.powf(alpha + 2.0) + alpha * r0.powf(alpha + 2.0) / 2.0)
        - PI * rs * rs * active_sum;
    num / (r0.powf(alpha) * PI * (rm * rm - h * rs * rs))
}

pub fn evaluate(s: &Scenario, mode: &OperationMode) -> Evaluation {
    check_mode(s, mode);
    evaluate_with(&ModelTerms::new(s), mode)
}

/// [`evaluate`] with precomputed scenario terms.
pub fn evaluate_with(terms: &ModelTerms, mode: &OperationMode) -> Evaluation {
    let (load, weight) = terms.sleeping_sums(mode);
    let mu = terms.base_load + load;
    let (traffic_factor, efficiency_factor) = if mu > 0.0 {
        (terms.traffic(mu), (terms.upsilon + weight) / (terms.r0_alpha * mu))
    } else {
        (0.0, 0.0)
    };
    let p_t = traffic_factor * efficiency_factor;
    let p_het = terms.fixed_power + terms.u * p_t + mode.active_count() as f64 * terms.delta_p;
    Evaluation {
        p_t,
        traffic_factor,
        efficiency_factor,
        p_het,
        feasible: p_t <= terms.p_t_max,
        mu,
    }
}

/// Increase of macro consumption `u·P^t` caused by putting the `m`-th closest
/// cell (1-based) to sleep after the `m − 1` closer ones already sleep.
pub fn delta_p_macro(s: &Scenario, m: usize) -> Result<f64> {
    let n = s.num_cells();
    if m == 0 || m > n {
        return Err(Error::contract(format!("cell rank must be in 1..={n}, got {m}")));
    }
    let order = distance_order(s);
    let terms = ModelTerms::new(s);
    let before = evaluate_with(&terms, &OperationMode::prefix_off(n, &order, m - 1));
    let after = evaluate_with(&terms, &OperationMode::prefix_off(n, &order, m));
    Ok(terms.u * (after.p_t - before.p_t))
}
