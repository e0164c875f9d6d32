//! Ground-truth checks for the closed-form model and the heuristics.
//!
//! * exhaustive search over all `2^M` operation modes;
//! * Monte-Carlo simulation of Poisson user drops with Rayleigh fading;
//! * direct numerical integration of the path-loss term over each small cell.
//!
//! Monte-Carlo draws are split into blocks of [`MC_BLOCK`] draws. Block `b`
//! uses `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so results do not
//! depend on the number of worker threads.

use std::f64::consts::{LN_2, PI};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::power_model::{evaluate, evaluate_with, Evaluation, ModelTerms, OperationMode};
use crate::scenario::{sbs_distances, Scenario};

/// Largest cell count accepted by [`exhaustive_search`].
pub const EXHAUSTIVE_CAP: usize = 24;
/// Draws per independent random stream.
pub const MC_BLOCK: u64 = 4096;
pub const MC_MIN_DRAWS: u64 = 1000;

/// Cheapest feasible mode over all `2^M` modes. Ties go to the
/// lexicographically smallest mode (sleeping = 0 sorts first).
pub fn exhaustive_search(s: &Scenario) -> Result<(OperationMode, Evaluation)> {
    let m = s.num_cells();
    if m > EXHAUSTIVE_CAP {
        return Err(Error::TooLarge { m, cap: EXHAUSTIVE_CAP });
    }
    let terms = ModelTerms::new(s);
    // Bit `m − 1 − i` of the mode index is θ_i, so index order is lex order.
    let low_bits = m.min(12);
    let high_bits = m - low_bits;
    let table = |bits: usize, offset: usize| -> Vec<(f64, f64, usize)> {
        (0..1usize << bits)
            .map(|j| {
                let mut load = 0.0;
                let mut weight = 0.0;
                let mut active = 0;
                for p in 0..bits {
                    let cell = m - 1 - (p + offset);
                    if j >> p & 1 == 1 {
                        active += 1;
                    } else {
                        load += terms.cell_load[cell];
                        weight += terms.cell_weight[cell];
                    }
                }
                (load, weight, active)
            })
            .collect()
    };
    let low = table(low_bits, 0);
    let high = table(high_bits, low_bits);

    let best = high
        .par_iter()
        .enumerate()
        .filter_map(|(h, &(hl, hw, ha))| {
            let mut best: Option<(f64, usize)> = None;
            for (j, &(ll, lw, la)) in low.iter().enumerate() {
                let p_t = terms.p_t(hl + ll, hw + lw);
                if p_t > terms.p_t_max {
                    continue;
                }
                let p_het = terms.fixed_power + terms.u * p_t + (ha + la) as f64 * terms.delta_p;
                if best.is_none_or(|(b, _)| p_het < b) {
                    best = Some((p_het, h << low_bits | j));
                }
            }
            best
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let (_, index) = best.ok_or_else(|| {
        Error::Infeasible("no operation mode meets the transmit power cap".into())
    })?;
    let mode = OperationMode::new((0..m).map(|i| index >> (m - 1 - i) & 1 == 1).collect());
    let eval = evaluate_with(&terms, &mode);
    Ok((mode, eval))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    /// Closed-form `T(θ)·Z(θ)`.
    pub p_t_analytic: f64,
    pub p_t_empirical_mean: f64,
    pub std_error: f64,
    pub n_draws: u64,
    /// Users sampled over all draws.
    pub n_users: u64,
    /// Fraction of sampled users whose rate fell below the target.
    pub outage_rate: f64,
    /// Relative error of the closed-form `Z` against direct integration.
    pub approx_error_z: f64,
    pub seed: u64,
}

/// Running mean/variance with the pairwise merge rule.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockStats {
    power: Moments,
    users: u64,
    outages: u64,
}

/// Where macro-served users can appear.
struct Sampler<'a> {
    s: &'a Scenario,
    centers: Vec<[f64; 2]>,
    regions: Option<WeightedIndex<f64>>,
    /// Region 0 is the open area; region `i > 0` is `centers[i − 1]`.
    poisson: Option<Poisson<f64>>,
    c_tx: f64,
    threshold: f64,
}

impl<'a> Sampler<'a> {
    fn new(s: &'a Scenario, mode: &OperationMode) -> Result<Self> {
        let terms = ModelTerms::new(s);
        let sleeping: Vec<usize> = mode.sleeping().collect();
        let mut weights = vec![terms.base_load];
        weights.extend(sleeping.iter().map(|&i| terms.cell_load[i]));
        let mu: f64 = weights.iter().sum();
        let (regions, poisson) = if mu > 0.0 {
            (
                Some(WeightedIndex::new(&weights).map_err(|e| Error::contract(e.to_string()))?),
                Some(Poisson::new(mu).map_err(|e| Error::contract(e.to_string()))?),
            )
        } else {
            (None, None)
        };
        Ok(Self {
            s,
            centers: sleeping.iter().map(|&i| s.sbs_positions[i]).collect(),
            regions,
            poisson,
            c_tx: terms.c_tx,
            threshold: -(-s.qos.epsilon).ln_1p(),
        })
    }

    fn in_small_cell(&self, p: [f64; 2]) -> bool {
        let rs2 = self.s.r_small * self.s.r_small;
        self.s
            .sbs_positions
            .iter()
            .any(|c| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) < rs2)
    }

    fn point_in_disc<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> [f64; 2] {
        let r = radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
    }

    fn user_position<R: Rng>(&self, rng: &mut R, region: usize) -> [f64; 2] {
        if region == 0 {
            loop {
                let p = Self::point_in_disc(rng, [0.0, 0.0], self.s.r_macro);
                if !self.in_small_cell(p) {
                    return p;
                }
            }
        }
        Self::point_in_disc(rng, self.centers[region - 1], self.s.r_small)
    }

    fn run_block<R: Rng>(&self, rng: &mut R, draws: u64) -> Result<BlockStats> {
        let mut out = BlockStats::default();
        let (Some(regions), Some(poisson)) = (&self.regions, &self.poisson) else {
            for _ in 0..draws {
                out.power.push(0.0);
            }
            return Ok(out);
        };
        let s = self.s;
        let r0 = s.channel.r0;
        let half_alpha = s.channel.alpha / 2.0;
        for _ in 0..draws {
            let k = poisson.sample(rng) as u64;
            if k == 0 {
                out.power.push(0.0);
                continue;
            }
            let kf = k as f64;
            let rate_gain = (kf * s.qos.rate_b * LN_2 / s.qos.bandwidth_w).exp_m1();
            let per_user = self.c_tx * rate_gain / kf;
            if !per_user.is_finite() {
                return Err(Error::Overflow { users: k });
            }
            let mut total = 0.0;
            for _ in 0..k {
                let region = regions.sample(rng);
                let p = self.user_position(rng, region);
                let rr2 = (p[0] * p[0] + p[1] * p[1]) / (r0 * r0);
                let g = if rr2 < 1.0 { 1.0 } else { rr2.powf(half_alpha) };
                total += per_user * g;
                let h: f64 = Exp1.sample(rng);
                if !meets_rate(s, k, rate_gain, h, self.threshold) {
                    out.outages += 1;
                }
            }
            out.users += k;
            out.power.push(total);
        }
        Ok(out)
    }
}

/// Whether a user served at the outage-sized power reaches the target rate
/// under fading gain `h`.
fn meets_rate(s: &Scenario, k: u64, rate_gain: f64, h: f64, threshold: f64) -> bool {
    // Received SNR over the per-user noise `ΓN0W/K` at the sized power.
    let snr = rate_gain * h / threshold;
    let rate = s.qos.bandwidth_w / k as f64 * snr.ln_1p() / LN_2;
    rate >= s.qos.rate_b
}

/// Simulates `n_draws` user drops in mode `mode` and compares the mean
/// macro transmit power with the closed form.
pub fn monte_carlo_validate(s: &Scenario, mode: &OperationMode, n_draws: u64, seed: u64) -> Result<McReport> {
    if n_draws < MC_MIN_DRAWS {
        return Err(Error::contract(format!(
            "at least {MC_MIN_DRAWS} draws required, got {n_draws}"
        )));
    }
    let eval = evaluate(s, mode);
    let sampler = Sampler::new(s, mode)?;
    let blocks = n_draws.div_ceil(MC_BLOCK);
    let parts: Vec<BlockStats> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let draws = MC_BLOCK.min(n_draws - b * MC_BLOCK);
            sampler.run_block(&mut rng, draws)
        })
        .collect::<Result<_>>()?;
    let total = parts.iter().fold(BlockStats::default(), |acc, p| BlockStats {
        power: acc.power.merge(p.power),
        users: acc.users + p.users,
        outages: acc.outages + p.outages,
    });
    let n = total.power.n;
    let std_error = if n > 1 {
        (total.power.m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    } else {
        0.0
    };
    Ok(McReport {
        p_t_analytic: eval.p_t,
        p_t_empirical_mean: total.power.mean,
        std_error,
        n_draws: n,
        n_users: total.users,
        outage_rate: if total.users > 0 {
            total.outages as f64 / total.users as f64
        } else {
            0.0
        },
        approx_error_z: approximation_error_z(s, mode)?,
        seed,
    })
}

/// Outage fraction of one user at distance `r_k` among `k_users`, served at
/// the outage-sized power, over `n_fading` independent fading gains.
pub fn per_user_outage(s: &Scenario, r_k: f64, k_users: u64, n_fading: u64, seed: u64) -> Result<f64> {
    if n_fading == 0 {
        return Err(Error::contract("need at least one fading draw"));
    }
    let p_tx = crate::power_model::per_user_tx_power(s, r_k, k_users)?;
    let ch = &s.channel;
    let gain = ch.d_ref_loss / crate::power_model::path_gain_inverse(s, r_k);
    let noise = ch.gamma_cap * ch.n0 * s.qos.bandwidth_w / k_users as f64;
    let band = s.qos.bandwidth_w / k_users as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outages = (0..n_fading)
        .filter(|_| {
            let h: f64 = Exp1.sample(&mut rng);
            let received = p_tx * h * gain;
            band * (received / noise).ln_1p() / LN_2 < s.qos.rate_b
        })
        .count();
    Ok(outages as f64 / n_fading as f64)
}

/// `∫ g(|y|) dy` over small cell `m`, with `g(r) = max(1, (r/r0)^α)`,
/// by polar quadrature around the cell center.
pub fn cell_path_loss_integral(s: &Scenario, m: usize) -> f64 {
    let d = sbs_distances(s)[m];
    let r0 = s.channel.r0;
    let half_alpha = s.channel.alpha / 2.0;
    let g = |rho: f64, phi: f64| {
        let rr2 = (d * d + rho * rho + 2.0 * d * rho * phi.cos()) / (r0 * r0);
        if rr2 < 1.0 {
            1.0
        } else {
            rr2.powf(half_alpha)
        }
    };
    let ring = |rho: f64| rho * periodic_trapezoid(|phi| g(rho, phi));
    let scale = PI * s.r_small * s.r_small * ((d + s.r_small) / r0).max(1.0).powf(s.channel.alpha);
    quadrature::double_exponential::integrate(ring, 0.0, s.r_small, 1e-12 * scale).integral
}

/// Trapezoid rule over one period, doubled until it settles.
fn periodic_trapezoid(f: impl Fn(f64) -> f64) -> f64 {
    let mut n = 16usize;
    let mut sum: f64 = (0..n).map(|i| f(2.0 * PI * i as f64 / n as f64)).sum();
    let mut estimate = 2.0 * PI * sum / n as f64;
    while n < 1 << 16 {
        let odd: f64 = (0..n).map(|i| f(2.0 * PI * (2 * i + 1) as f64 / (2 * n) as f64)).sum();
        sum += odd;
        n *= 2;
        let next = 2.0 * PI * sum / n as f64;
        if (next - estimate).abs() <= 1e-13 * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `∫ g(|y|) dy` over the whole macro disc (exact).
fn macro_disc_integral(s: &Scenario) -> f64 {
    let a = s.channel.alpha;
    let r0 = s.channel.r0;
    2.0 * PI / (a + 2.0) * (s.r_macro.powf(a + 2.0) + a * r0.powf(a + 2.0) / 2.0) / r0.powf(a)
}

/// `Z(θ)` with every region integral evaluated numerically.
pub fn exact_efficiency_factor(s: &Scenario, mode: &OperationMode) -> Result<f64> {
    let eval = evaluate(s, mode);
    if eval.mu <= 0.0 {
        return Err(Error::DegenerateLoad);
    }
    let cells: Vec<f64> = (0..s.num_cells()).map(|i| cell_path_loss_integral(s, i)).collect();
    let open = macro_disc_integral(s) - cells.iter().sum::<f64>();
    let handed: f64 = mode.sleeping().map(|i| s.lambdas[i] * cells[i]).sum();
    Ok((s.lambda0 * open + handed) / eval.mu)
}

/// `|Z_closed − Z_exact| / Z_exact`; zero when nobody is macro-served.
pub fn approximation_error_z(s: &Scenario, mode: &OperationMode) -> Result<f64> {
    let eval = evaluate(s, mode);
    if eval.mu <= 0.0 {
        return Ok(0.0);
    }
    let exact = exact_efficiency_factor(s, mode)?;
    Ok((eval.efficiency_factor - exact).abs() / exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ChannelParams, PowerParams, QosParams};

    fn single(lambda: f64) -> Scenario {
        Scenario {
            r_macro: 500.0,
            r_small: 20.0,
            sbs_positions: vec![[200.0, 0.0]],
            lambda0: 1e-4,
            lambdas: vec![lambda],
            channel: ChannelParams::reference(),
            qos: QosParams::reference(),
            power: PowerParams::reference(),
        }
    }

    #[test]
    fn single_cell_extremes() {
        let (mode, _) = exhaustive_search(&single(10.0)).unwrap();
        assert_eq!(mode.to_string(), "1");
        let (mode, _) = exhaustive_search(&single(1e-12)).unwrap();
        assert_eq!(mode.to_string(), "0");
    }

    #[test]
    fn size_cap() {
        let mut s = single(1e-3);
        s.sbs_positions = (0..25).map(|i| [-480.0 + 40.0 * i as f64, 0.0]).collect();
        s.lambdas = vec![1e-3; 25];
        assert!(matches!(exhaustive_search(&s), Err(Error::TooLarge { m: 25, cap: 24 })));
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..37].iter().for_each(|&x| a.push(x));
        xs[37..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert_eq!(m.n, all.n);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 / all.m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_is_exact_for_trig_polynomials() {
        let v = periodic_trapezoid(|phi| 3.0 + phi.cos().powi(2));
        assert!((v - 2.0 * PI * 3.5).abs() < 1e-12);
    }

    #[test]
    fn cell_integral_near_closed_form() {
        let s = single(1e-3);
        let exact = cell_path_loss_integral(&s, 0);
        let approx = PI * 400.0 * 200f64.powf(2.5);
        let second_order = approx * (1.0 + 2.5 * 2.5 * 400.0 / (8.0 * 200.0 * 200.0));
        assert!(exact > approx);
        assert!((exact / second_order - 1.0).abs() < 1e-4);
    }

    #[test]
    fn too_few_draws() {
        let s = single(1e-3);
        assert!(monte_carlo_validate(&s, &OperationMode::all_on(1), 10, 1).is_err());
    }
}
