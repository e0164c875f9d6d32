mod common;

use common::{random_uniform, rel_diff};
use hetnet_sleep::power_model::delta_p_macro;
use hetnet_sleep::scenario::distance_order;
use hetnet_sleep::uniform::{
    f_helper, f_helper_limit, h_all_off, h_all_on, threshold_lambda_off, threshold_lambda_on,
};
use hetnet_sleep::validation::exhaustive_search;
use hetnet_sleep::{solve_uniform, Error, OperationMode, Scenario};
use proptest::prelude::*;

fn uncapped(mut s: Scenario) -> Scenario {
    s.power.p_t_max = f64::INFINITY;
    s
}

fn with_lambda(s: &Scenario, l: f64) -> Scenario {
    s.with_densities(l, vec![l; s.num_cells()]).unwrap()
}

/// Root of `h(λ) = target` by geometric scanning: coarse steps of 1%, then
/// steps of one part per million inside the bracketing step.
fn scan_root(h: impl Fn(f64) -> f64, target: f64) -> f64 {
    let mut lo = 1e-7;
    while h(lo * 1.01) < target {
        lo *= 1.01;
    }
    let mut x = lo;
    while h(x * (1.0 + 1e-6)) < target {
        x *= 1.0 + 1e-6;
    }
    x
}

#[test]
fn thresholds_match_dense_scan() {
    for seed in 0..4 {
        let s = random_uniform(seed, 4);
        let dp = s.power.delta_p();
        let off = threshold_lambda_off(&s).unwrap();
        let on = threshold_lambda_on(&s).unwrap();
        let off_scan = scan_root(|l| h_all_off(&s, l).unwrap(), dp);
        let on_scan = scan_root(|l| h_all_on(&s, l).unwrap(), dp);
        assert!(rel_diff(off, off_scan) < 2e-6, "{off} vs {off_scan}");
        assert!(rel_diff(on, on_scan) < 2e-6, "{on} vs {on_scan}");
    }
}

#[test]
fn thresholds_bound_the_solver_regimes() {
    for seed in 0..20 {
        let s = uncapped(random_uniform(seed, 2 + seed as usize % 10));
        let m = s.num_cells();
        let off = threshold_lambda_off(&s).unwrap();
        let on = threshold_lambda_on(&s).unwrap();
        assert!(on >= off);
        assert_eq!(solve_uniform(&with_lambda(&s, off * 0.999)).unwrap().m_th, m);
        assert!(solve_uniform(&with_lambda(&s, off * 1.001)).unwrap().m_th < m);
        assert_eq!(solve_uniform(&with_lambda(&s, on * 1.001)).unwrap().m_th, 0);
        assert!(solve_uniform(&with_lambda(&s, on * 0.999)).unwrap().m_th > 0);
    }
}

#[test]
fn thresholds_vanish_with_the_sleep_saving() {
    let mut s = random_uniform(3, 6);
    let base_off = threshold_lambda_off(&s).unwrap();
    let base_on = threshold_lambda_on(&s).unwrap();
    s.power.p_sbs_active = s.power.p_sbs_sleep + 1e-9;
    assert!(threshold_lambda_off(&s).unwrap() < 1e-3 * base_off);
    assert!(threshold_lambda_on(&s).unwrap() < 1e-3 * base_on);
}

#[test]
fn doubling_rate_lowers_and_doubling_band_raises_threshold() {
    let s = random_uniform(11, 5);
    let base = threshold_lambda_off(&s).unwrap();
    let mut b = s.clone();
    b.qos.rate_b *= 2.0;
    assert!(threshold_lambda_off(&b).unwrap() < base);
    let mut w = s.clone();
    w.qos.bandwidth_w *= 2.0;
    assert!(threshold_lambda_on(&w).unwrap() > threshold_lambda_on(&s).unwrap());
}

#[test]
fn dense_users_keep_everything_on() {
    let s = random_uniform(5, 6);
    let on = threshold_lambda_on(&s).unwrap();
    let dense = with_lambda(&s, on * 1.5);
    if let Ok(sol) = solve_uniform(&dense) {
        assert_eq!(sol.m_th, 0);
        assert_eq!(sol.mode, OperationMode::all_on(6));
    }
}

#[test]
fn helper_is_increasing() {
    let s = random_uniform(1, 3);
    let mut prev = f_helper_limit(&s);
    for k in 1..2000 {
        let v = f_helper(&s, k as f64 * 0.5).unwrap();
        assert!(v > prev);
        prev = v;
    }
    assert!(matches!(f_helper(&s, 0.0), Err(Error::DegenerateLoad)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn matches_exhaustive_optimum(seed in any::<u64>(), m in 1usize..=12) {
        let s = random_uniform(seed, m);
        let Ok(sol) = solve_uniform(&s) else { return Ok(()) };
        let (best, eval) = exhaustive_search(&s).unwrap();
        prop_assert!(rel_diff(sol.eval.p_het, eval.p_het) <= 1e-9);
        let order = distance_order(&s);
        let k = best.sleeping().count();
        prop_assert_eq!(best, OperationMode::prefix_off(m, &order, k));
    }

    #[test]
    fn solution_is_consistent(seed in any::<u64>(), m in 1usize..=16) {
        let s = random_uniform(seed, m);
        let Ok(sol) = solve_uniform(&s) else { return Ok(()) };
        prop_assert_eq!(sol.m_th, sol.m_th1.min(sol.m_th2));
        prop_assert_eq!(&sol.mode, &OperationMode::prefix_off(m, &sol.order, sol.m_th));
        prop_assert!(sol.eval.feasible);
        let dp = s.power.delta_p();
        if sol.m_th > 0 {
            prop_assert!(delta_p_macro(&s, sol.m_th).unwrap() < dp);
        }
        if sol.m_th < m {
            let next = delta_p_macro(&s, sol.m_th + 1).unwrap();
            let next_mode = OperationMode::prefix_off(m, &sol.order, sol.m_th + 1);
            let next_infeasible = !hetnet_sleep::evaluate(&s, &next_mode).feasible;
            prop_assert!(next >= dp || next_infeasible);
        }
    }
}
