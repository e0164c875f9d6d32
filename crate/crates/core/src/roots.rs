//! Bisection for the monotone threshold equations.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct BracketPolicy {
    /// Lower end of the initial bracket.
    pub lo: f64,
    /// First trial upper end; doubled until the sign changes.
    pub hi_start: f64,
    pub max_doublings: usize,
    pub max_iter: usize,
    /// Stop once `hi − lo ≤ rel_width · hi`.
    pub rel_width: f64,
}

impl Default for BracketPolicy {
    fn default() -> Self {
        Self {
            lo: 1e-12,
            hi_start: 1e-6,
            max_doublings: 2000,
            max_iter: 200,
            rel_width: 1e-12,
        }
    }
}

/// Root of `h(x) = target` for `h` increasing on `[0, ∞)` with `h(0) = 0`.
pub fn solve_increasing<F>(h: F, target: f64, policy: &BracketPolicy) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(target > 0.0) {
        return Err(Error::Bracket(format!("target must be positive, got {target}")));
    }
    let mut lo = policy.lo;
    let mut hi;
    let at_lo = h(lo);
    if at_lo.is_nan() {
        return Err(Error::Bracket(format!("h({lo}) is NaN")));
    }
    if at_lo >= target {
        hi = lo;
        lo = 0.0;
    } else {
        hi = policy.hi_start.max(lo);
        let mut doublings = 0;
        loop {
            let v = h(hi);
            if v.is_nan() {
                return Err(Error::Bracket(format!("h({hi}) is NaN")));
            }
            if v >= target {
                break;
            }
            lo = hi;
            hi *= 2.0;
            doublings += 1;
            if doublings > policy.max_doublings || !hi.is_finite() {
                return Err(Error::Bracket(format!(
                    "no sign change of h(x) - {target} found up to x = {hi}"
                )));
            }
        }
    }
    for _ in 0..policy.max_iter {
        if hi - lo <= policy.rel_width * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if h(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of `g` on `[a, b]` where `g(a)` and `g(b)` have strictly opposite
/// signs. Returns `None` without a sign change.
pub fn bisect_sign_change<F>(g: F, mut a: f64, mut b: f64, abs_tol: f64, max_iter: usize) -> Option<f64>
where
    F: Fn(f64) -> f64,
{
    let mut ga = g(a);
    let gb = g(b);
    if ga == 0.0 {
        return Some(a);
    }
    if gb == 0.0 {
        return Some(b);
    }
    if ga.is_nan() || gb.is_nan() || ga.signum() == gb.signum() {
        return None;
    }
    for _ in 0..max_iter {
        if b - a <= abs_tol {
            break;
        }
        let mid = 0.5 * (a + b);
        let gm = g(mid);
        if gm == 0.0 {
            return Some(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Some(0.5 * (a + b))
}
