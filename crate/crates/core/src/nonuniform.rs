//! Polynomial-time operation for cells with different user densities.
//!
//! The total power minus the mode-independent part equals
//! `P̂(L) − Σ_{θ_m=0} Δ_m(L)`, where `L` is the load handed to the macro BS by
//! sleeping cells and `Δ_m(L)` the net saving of putting cell `m` to sleep at
//! that load. The solver
//!
//! 1. fixes cells whose density is provably low enough (always sleep) or high
//!    enough (always active), whatever the other cells do;
//! 2. ranks the remaining cells by saving per handed-over user `Q_m(L)`. The
//!    ranking only changes at pairwise crossing loads ("switching points"), so
//!    the load axis splits into intervals with a constant ranking;
//! 3. for every ranking, tries each sleeping prefix whose handed-over load falls
//!    in that ranking's interval, and keeps the cheapest feasible mode.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::power_model::{evaluate_with, Evaluation, ModelTerms, OperationMode};
use crate::roots::{bisect_sign_change, solve_increasing, BracketPolicy};
use crate::scenario::Scenario;

/// Absolute load tolerance of switching-point bisection, in users.
pub const SWITCH_TOL: f64 = 1e-9;
const SWITCH_MAX_ITER: usize = 300;
/// Grid resolution of the pre-scan that looks for repeated crossings.
const SWITCH_SCAN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeClassification {
    /// Cells that stay active in every optimal mode.
    pub forced_on: Vec<usize>,
    /// Cells that sleep in every optimal mode.
    pub forced_off: Vec<usize>,
    pub free: Vec<usize>,
    /// Per-cell density below which the cell always sleeps.
    pub lambda_off: Vec<f64>,
    /// Per-cell density above which the cell always stays active.
    pub lambda_on: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingPoint {
    pub pair: (usize, usize),
    /// Handed-over load, in expected users, where both cells save equally per user.
    pub load_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ListId {
    AllOn,
    ForcedOnly,
    /// Index of the power-saving list, 0 being the ranking at zero load.
    Ranking(usize),
}

impl fmt::Display for ListId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ListId::AllOn => f.write_str("all_on"),
            ListId::ForcedOnly => f.write_str("forced_only"),
            ListId::Ranking(i) => write!(f, "list_{i}"),
        }
    }
}

impl Serialize for ListId {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub mode: OperationMode,
    pub eval: Evaluation,
    pub list_id: ListId,
}

#[derive(Debug, Clone, Serialize)]
pub struct NonuniformReport {
    pub best: Candidate,
    pub regimes: RegimeClassification,
    /// Whether the forced-off set had to be released to respect the cap.
    pub forced_off_released: bool,
    pub switching_points: Vec<SwitchingPoint>,
    pub lists: usize,
    pub candidates: usize,
}

/// Upper end of the handed-over load range, `Σ_m λ_m πR_s²`.
pub fn max_handover_load(s: &Scenario) -> f64 {
    s.lambdas.iter().sum::<f64>() * s.cell_area()
}

fn check_load(terms: &ModelTerms, s: &Scenario, load: f64) -> Result<()> {
    let hi = max_handover_load(s);
    if !(load >= 0.0 && load <= hi * (1.0 + 1e-12)) {
        return Err(Error::contract(format!("handover load {load} outside [0, {hi}]")));
    }
    if terms.base_load + load == 0.0 {
        return Err(Error::DegenerateLoad);
    }
    Ok(())
}

/// Network power above the mode-independent part with every cell active,
/// evaluated at macro load `L̲ + L`.
pub fn phat(s: &Scenario, load: f64) -> Result<f64> {
    let terms = ModelTerms::new(s);
    check_load(&terms, s, load)?;
    Ok(terms.f(terms.base_load + load) * terms.upsilon)
}

/// Net power saved by putting cell `m` to sleep at handed-over load `L`.
pub fn delta_m(s: &Scenario, m: usize, load: f64) -> Result<f64> {
    let terms = ModelTerms::new(s);
    check_load(&terms, s, load)?;
    Ok(terms.delta_p - terms.f(terms.base_load + load) * terms.cell_weight[m])
}

/// `Q_m(L) = Δ_m(L) / (λ_m πR_s²)`.
pub fn power_saving_efficiency(s: &Scenario, m: usize, load: f64) -> Result<f64> {
    let terms = ModelTerms::new(s);
    check_load(&terms, s, load)?;
    Ok(efficiency_with(&terms, m, load))
}

fn efficiency_with(terms: &ModelTerms, m: usize, load: f64) -> f64 {
    (terms.delta_p - terms.f(terms.base_load + load) * terms.cell_weight[m]) / terms.cell_load[m]
}

/// Density of cell `m` below which sleeping saves power even when every
/// other cell already sleeps.
pub fn threshold_off_cell(s: &Scenario, m: usize) -> Result<f64> {
    let terms = ModelTerms::new(s);
    let area = s.cell_area();
    let geo = terms.cell_geometry[m];
    let others_load: f64 = terms.base_load + terms.cell_load.iter().sum::<f64>() - terms.cell_load[m];
    let others_weight: f64 = terms.cell_weight.iter().sum::<f64>() - terms.cell_weight[m];
    let f_base = terms.f(others_load);
    let h = |l: f64| {
        (terms.upsilon + others_weight + l * geo) * (terms.f(others_load + l * area) - f_base)
            + f_base * l * geo
    };
    solve_increasing(saturate(h), terms.delta_p, &BracketPolicy::default())
}

/// Density of cell `m` above which sleeping costs power even when every
/// other cell is active.
pub fn threshold_on_cell(s: &Scenario, m: usize) -> Result<f64> {
    let terms = ModelTerms::new(s);
    let area = s.cell_area();
    let geo = terms.cell_geometry[m];
    let f_base = terms.f(terms.base_load);
    let h = |l: f64| {
        let f_l = terms.f(terms.base_load + l * area);
        terms.upsilon * (f_l - f_base) + f_l * l * geo
    };
    solve_increasing(saturate(h), terms.delta_p, &BracketPolicy::default())
}

/// Overflowing macro power means the handover is unaffordable at any cap.
fn saturate(h: impl Fn(f64) -> f64) -> impl Fn(f64) -> f64 {
    move |l| {
        let v = h(l);
        if v.is_nan() { f64::INFINITY } else { v }
    }
}

pub fn classify_regimes(s: &Scenario) -> Result<RegimeClassification> {
    let m = s.num_cells();
    let mut out = RegimeClassification {
        forced_on: Vec::new(),
        forced_off: Vec::new(),
        free: Vec::new(),
        lambda_off: Vec::with_capacity(m),
        lambda_on: Vec::with_capacity(m),
    };
    for i in 0..m {
        let off = threshold_off_cell(s, i)?;
        let on = threshold_on_cell(s, i)?;
        let l = s.lambdas[i];
        if l > on {
            out.forced_on.push(i);
        } else if l < off {
            out.forced_off.push(i);
        } else {
            out.free.push(i);
        }
        out.lambda_off.push(off);
        out.lambda_on.push(on);
    }
    Ok(out)
}

/// Loads in `[0, Σλ_mπR_s²]` where two of `cells` swap their saving-per-user
/// ranking, sorted ascending.
pub fn switching_points(s: &Scenario, cells: &[usize]) -> Vec<SwitchingPoint> {
    let terms = ModelTerms::new(s);
    switching_points_with(&terms, max_handover_load(s), cells)
}

fn switching_points_with(terms: &ModelTerms, hi: f64, cells: &[usize]) -> Vec<SwitchingPoint> {
    let mut out = Vec::new();
    for (ai, &a) in cells.iter().enumerate() {
        for &b in &cells[ai + 1..] {
            let g = |l: f64| efficiency_with(terms, a, l) - efficiency_with(terms, b, l);
            let grid: Vec<(f64, f64)> = (0..=SWITCH_SCAN)
                .map(|k| {
                    let l = hi * k as f64 / SWITCH_SCAN as f64;
                    (l, g(l))
                })
                .collect();
            if grid.iter().all(|&(_, v)| v == 0.0) {
                // Identical cells: any order gives the same candidates.
                continue;
            }
            let changes: Vec<(f64, f64)> = grid
                .windows(2)
                .filter(|w| w[0].1 != 0.0 && w[0].1.signum() != w[1].1.signum() && w[1].1 != 0.0)
                .map(|w| (w[0].0, w[1].0))
                .collect();
            if changes.len() > 1 {
                log::warn!(
                    "cells {a} and {b} swap ranking {} times on the load range; emitting every crossing",
                    changes.len()
                );
            }
            let endpoints_differ = {
                let (g0, g1) = (grid[0].1, grid[SWITCH_SCAN].1);
                g0 != 0.0 && g1 != 0.0 && g0.signum() != g1.signum()
            };
            if changes.len() <= 1 {
                if endpoints_differ {
                    if let Some(l) = bisect_sign_change(g, 0.0, hi, SWITCH_TOL, SWITCH_MAX_ITER) {
                        out.push(SwitchingPoint { pair: (a, b), load_l: l });
                    }
                }
            } else {
                for (lo, up) in changes {
                    if let Some(l) = bisect_sign_change(g, lo, up, SWITCH_TOL, SWITCH_MAX_ITER) {
                        out.push(SwitchingPoint { pair: (a, b), load_l: l });
                    }
                }
            }
        }
    }
    out.sort_by(|x, y| x.load_l.total_cmp(&y.load_l).then(x.pair.cmp(&y.pair)));
    out
}

/// Best operation mode found by the location-and-density-based search.
pub fn solve_nonuniform(s: &Scenario) -> Result<Candidate> {
    solve_nonuniform_report(s).map(|r| r.best)
}

pub fn solve_nonuniform_report(s: &Scenario) -> Result<NonuniformReport> {
    let m = s.num_cells();
    let terms = ModelTerms::new(s);
    let all_on = OperationMode::all_on(m);
    let all_on_eval = evaluate_with(&terms, &all_on);
    if !all_on_eval.feasible {
        return Err(Error::Infeasible(format!(
            "all-on transmit power {:.6} W exceeds the {} W cap",
            all_on_eval.p_t, s.power.p_t_max
        )));
    }

    let regimes = classify_regimes(s)?;
    let mut forced_only = OperationMode::all_on(m);
    for &i in &regimes.forced_off {
        forced_only.set(i, false);
    }
    // Sleeping the forced-off set is only provably optimal without the cap.
    let mut free = regimes.free.clone();
    let mut fixed_off = regimes.forced_off.clone();
    let forced_off_released = !evaluate_with(&terms, &forced_only).feasible;
    if forced_off_released {
        log::debug!("forced-off cells violate the transmit cap; treating them as free");
        free.append(&mut fixed_off);
        free.sort_unstable();
    }

    let hi = max_handover_load(s);
    let points = switching_points_with(&terms, hi, &free);
    let mut breaks: Vec<f64> = Vec::with_capacity(points.len() + 2);
    breaks.push(0.0);
    breaks.extend(points.iter().map(|p| p.load_l));
    breaks.push(hi);

    let mut ranking = free.clone();
    ranking.sort_by(|&a, &b| {
        efficiency_with(&terms, b, 0.0)
            .total_cmp(&efficiency_with(&terms, a, 0.0))
            .then(a.cmp(&b))
    });

    let base_mode = {
        let mut mode = OperationMode::all_on(m);
        for &i in &fixed_off {
            mode.set(i, false);
        }
        mode
    };
    let base_load: f64 = fixed_off.iter().map(|&i| terms.cell_load[i]).sum();

    let mut seen: HashSet<OperationMode> = HashSet::new();
    let mut modes: Vec<(OperationMode, ListId)> = Vec::new();
    let mut push = |mode: OperationMode, id: ListId, modes: &mut Vec<(OperationMode, ListId)>| {
        if seen.insert(mode.clone()) {
            modes.push((mode, id));
        }
    };
    push(all_on.clone(), ListId::AllOn, &mut modes);
    push(forced_only.clone(), ListId::ForcedOnly, &mut modes);

    for n in 1..breaks.len() {
        let (lo, up) = (breaks[n - 1], breaks[n]);
        let mut mode = base_mode.clone();
        let mut cum = base_load;
        for &cell in &ranking {
            cum += terms.cell_load[cell];
            mode.set(cell, false);
            if cum >= lo && cum <= up {
                push(mode.clone(), ListId::Ranking(n - 1), &mut modes);
            }
        }
        if let Some(p) = points.get(n - 1) {
            apply_switch(&terms, hi, &mut ranking, p);
            let next_up = breaks.get(n + 1).copied().unwrap_or(hi);
            if next_up > up {
                check_ranking(&terms, &mut ranking, 0.5 * (up + next_up));
            }
        }
    }
    let lists = breaks.len() - 1;

    let best = modes
        .par_iter()
        .enumerate()
        .map(|(idx, (mode, id))| (idx, evaluate_with(&terms, mode), *id))
        .filter(|(_, e, _)| e.feasible)
        .min_by(|a, b| a.1.p_het.total_cmp(&b.1.p_het).then(a.0.cmp(&b.0)))
        .map(|(idx, eval, list_id)| Candidate {
            mode: modes[idx].0.clone(),
            eval,
            list_id,
        })
        .expect("the all-on candidate is feasible");

    Ok(NonuniformReport {
        best,
        regimes,
        forced_off_released,
        switching_points: points,
        lists,
        candidates: modes.len(),
    })
}

/// Past the crossing, the cell that saves more per user at the top of the
/// load range goes first.
fn apply_switch(terms: &ModelTerms, hi: f64, ranking: &mut [usize], p: &SwitchingPoint) {
    let (a, b) = p.pair;
    let (Some(pa), Some(pb)) = (
        ranking.iter().position(|&c| c == a),
        ranking.iter().position(|&c| c == b),
    ) else {
        return;
    };
    let a_first_after = efficiency_with(terms, a, hi) > efficiency_with(terms, b, hi);
    if (pa < pb) != a_first_after {
        ranking.swap(pa, pb);
    }
}

fn check_ranking(terms: &ModelTerms, ranking: &mut [usize], load: f64) {
    let q: Vec<f64> = ranking.iter().map(|&c| efficiency_with(terms, c, load)).collect();
    if q.windows(2).all(|w| w[0] >= w[1]) {
        return;
    }
    log::warn!("power-saving list out of order at load {load}; re-sorting");
    ranking.sort_by(|&a, &b| {
        efficiency_with(terms, b, load)
            .total_cmp(&efficiency_with(terms, a, load))
            .then(a.cmp(&b))
    });
}
