#![allow(dead_code)]

use hetnet_sleep::scenario::{ChannelParams, PowerParams, QosParams};
use hetnet_sleep::uniform::threshold_lambda_off;
use hetnet_sleep::{evaluate, OperationMode, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn reference(positions: Vec<[f64; 2]>, lambda0: f64, lambdas: Vec<f64>) -> Scenario {
    Scenario {
        r_macro: 500.0,
        r_small: 20.0,
        sbs_positions: positions,
        lambda0,
        lambdas,
        channel: ChannelParams::reference(),
        qos: QosParams::reference(),
        power: PowerParams::reference(),
    }
}

/// Four cells on the axes at 100, 200, 300 and 400 m.
pub fn layout4() -> Scenario {
    reference(
        vec![[100.0, 0.0], [0.0, 200.0], [-300.0, 0.0], [0.0, -400.0]],
        5e-4,
        vec![2e-3, 1e-2, 5e-3, 2e-2],
    )
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

/// `m` disjoint discs of radius `r_small` inside the macro disc.
pub fn random_layout(rng: &mut ChaCha8Rng, m: usize, r_macro: f64, r_small: f64) -> Vec<[f64; 2]> {
    let mut out: Vec<[f64; 2]> = Vec::with_capacity(m);
    while out.len() < m {
        let r = (r_macro - r_small) * rng.random::<f64>().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let p = [r * phi.cos(), r * phi.sin()];
        let d = p[0].hypot(p[1]);
        if d < 1.0 {
            continue;
        }
        if out.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= 2.0 * r_small) {
            out.push(p);
        }
    }
    out
}

/// Equal densities everywhere, close to the all-sleep threshold where partial
/// sleeping pays off. Every other instance gets a transmit cap between the
/// all-on and the all-sleeping transmit power.
pub fn random_uniform(seed: u64, m: usize) -> Scenario {
    let mut rng = rng(seed);
    let positions = random_layout(&mut rng, m, 500.0, 20.0);
    let template = reference(positions, 1e-3, vec![1e-3; m]);
    let off = threshold_lambda_off(&template).unwrap();
    let lambda = off * (0.97 + 0.09 * rng.random::<f64>());
    let mut s = template.with_densities(lambda, vec![lambda; m]).unwrap();
    if rng.random::<bool>() {
        let on = evaluate(&s, &OperationMode::all_on(m)).p_t;
        let off = evaluate(&s, &OperationMode::all_off(m)).p_t;
        s.power.p_t_max = on + (off - on) * rng.random::<f64>();
    } else {
        s.power.p_t_max = 1e4;
    }
    s
}

/// Independent small-cell densities, spread around the per-cell thresholds.
pub fn random_nonuniform(seed: u64, m: usize) -> Scenario {
    let mut rng = rng(seed);
    let positions = random_layout(&mut rng, m, 500.0, 20.0);
    let lambda0 = log_uniform(&mut rng, 1e-4, 1.2e-3);
    let lambdas = (0..m).map(|_| log_uniform(&mut rng, 1e-2, 5e-1)).collect();
    reference(positions, lambda0, lambdas)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
