//! Experiment driver behind the `hetnet` binary: preset layouts, random
//! density draws, admission control, benchmark schemes and CSV output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonuniform::solve_nonuniform;
use crate::power_model::{evaluate, Evaluation, OperationMode};
use crate::scenario::{is_uniform, load_scenario, ChannelParams, PowerParams, QosParams, Scenario, UNIFORM_TOL};
use crate::uniform::solve_uniform;
use crate::validation::exhaustive_search;

/// Default spread of the small-cell densities around `50 λ0`.
pub const DEFAULT_SIGMA2: f64 = 1e-5;
/// Activation patterns averaged for the expected probability-based row.
pub const PROB_ON_PATTERNS: u64 = 64;
/// Absolute transmit-power tolerance of admission control, in W.
pub const ADMISSION_TOL: f64 = 1e-6;
/// Ratio of small-cell to macro density in generated scenarios.
pub const HOTSPOT_FACTOR: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Optimized sleep control.
    Alg,
    AlwaysOn,
    /// Each small cell active independently with a fixed probability.
    ProbOn,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Alg => "alg",
            Scheme::AlwaysOn => "always_on",
            Scheme::ProbOn => "prob_on",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Location-based for equal densities, location-and-density-based otherwise.
    #[default]
    Auto,
    Uniform,
    Nonuniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 144 small cells on a 12×12 grid, 50 m pitch, in a 500 m macro cell.
    Grid144,
    /// 20 small cells on a golden-angle spiral in a 500 m macro cell.
    Ring20,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseLayout {
    Preset(Preset),
    /// Scenario file; relative paths resolve against the spec file's directory.
    Scenario(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lambda0_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_p_active")]
    pub p_active: f64,
    #[serde(default)]
    pub base: Option<BaseLayout>,
}

fn default_sigma2() -> f64 {
    DEFAULT_SIGMA2
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Alg, Scheme::AlwaysOn, Scheme::ProbOn]
}

fn default_p_active() -> f64 {
    0.7
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lambda0_grid.is_empty() {
            return Err(Error::validation("lambda0 grid is empty"));
        }
        if !self.lambda0_grid.iter().all(|&l| l.is_finite() && l > 0.0) {
            return Err(Error::validation("lambda0 grid values must be positive"));
        }
        if !self.lambda0_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::validation("lambda0 grid must be strictly increasing"));
        }
        if self.seeds.is_empty() {
            return Err(Error::validation("no seeds given"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::validation("sigma2 must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.p_active) {
            return Err(Error::validation("p_active must lie in [0, 1]"));
        }
        if self.schemes.is_empty() {
            return Err(Error::validation("no schemes given"));
        }
        Ok(())
    }
}

/// Reads a sweep spec and resolves a scenario-file base against its directory.
pub fn load_sweep_spec(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let mut spec: SweepSpec = serde_json::from_str(&fs::read_to_string(path)?)?;
    if let Some(BaseLayout::Scenario(p)) = &mut spec.base {
        if p.is_relative() {
            *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Template scenario for a spec, `fallback` when it names none.
pub fn base_scenario(spec: &SweepSpec, fallback: Preset) -> Result<Scenario> {
    match &spec.base {
        None => Ok(preset(fallback)),
        Some(BaseLayout::Preset(p)) => Ok(preset(*p)),
        Some(BaseLayout::Scenario(path)) => load_scenario(path),
    }
}

fn reference_scenario(positions: Vec<[f64; 2]>) -> Scenario {
    let m = positions.len();
    Scenario {
        r_macro: 500.0,
        r_small: 20.0,
        sbs_positions: positions,
        lambda0: 1e-3,
        lambdas: vec![1e-3; m],
        channel: ChannelParams::reference(),
        qos: QosParams::reference(),
        power: PowerParams::reference(),
    }
}

pub fn preset(p: Preset) -> Scenario {
    match p {
        Preset::Grid144 => {
            let coords: Vec<f64> = (0..12).map(|i| -275.0 + 50.0 * i as f64).collect();
            let positions = coords
                .iter()
                .flat_map(|&x| coords.iter().map(move |&y| [x, y]))
                .collect();
            reference_scenario(positions)
        }
        Preset::Ring20 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let positions = (0..20)
                .map(|i| {
                    let r = 60.0 + 21.0 * i as f64;
                    let phi = golden * i as f64;
                    [r * phi.cos(), r * phi.sin()]
                })
                .collect();
            reference_scenario(positions)
        }
    }
}

/// Base layout with macro density `lambda0` and small-cell densities drawn
/// uniformly from `50 λ0 ± √(3σ²)`.
pub fn generate_scenario(base: &Scenario, lambda0: f64, sigma2: f64, seed: u64) -> Result<Scenario> {
    let half = (3.0 * sigma2).sqrt();
    let center = HOTSPOT_FACTOR * lambda0;
    if !(center - half > 0.0) {
        return Err(Error::validation(format!(
            "density range {center} ± {half} reaches zero; lower sigma2 or raise lambda0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas = (0..base.num_cells())
        .map(|_| center - half + 2.0 * half * rng.random::<f64>())
        .collect();
    base.with_densities(lambda0, lambdas)
}

/// Copy of `s` with the macro-served densities (open area and sleeping
/// cells) multiplied by `a`.
fn thin(s: &Scenario, mode: &OperationMode, a: f64) -> Scenario {
    let mut t = s.clone();
    t.lambda0 *= a;
    for i in mode.sleeping() {
        t.lambdas[i] *= a;
    }
    t
}

/// Largest admitted fraction `a` of macro-served users for which `mode`
/// meets the transmit cap, and the thinned scenario.
pub fn admission_control(s: &Scenario, mode: &OperationMode) -> Result<(Scenario, f64)> {
    let cap = s.power.p_t_max;
    if evaluate(s, mode).feasible {
        return Err(Error::contract("admission control called on a feasible mode"));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p_t = evaluate(&thin(s, mode, mid), mode).p_t;
        if p_t <= cap {
            lo = mid;
            if cap - p_t <= ADMISSION_TOL {
                break;
            }
        } else {
            hi = mid;
        }
    }
    Ok((thin(s, mode, lo), lo))
}

/// Runs the chosen optimizer.
pub fn solve(s: &Scenario, algorithm: Algorithm) -> Result<(OperationMode, Evaluation)> {
    let uniform = match algorithm {
        Algorithm::Auto => is_uniform(s, UNIFORM_TOL),
        Algorithm::Uniform => true,
        Algorithm::Nonuniform => false,
    };
    if uniform {
        solve_uniform(s).map(|r| (r.mode, r.eval))
    } else {
        solve_nonuniform(s).map(|c| (c.mode, c.eval))
    }
}

/// Optimizer result, after thinning the load when even all-on is infeasible.
#[derive(Debug, Clone)]
pub struct AdmittedSolution {
    pub scenario: Scenario,
    pub mode: OperationMode,
    pub eval: Evaluation,
    pub feasible_before_admission: bool,
    pub admitted_fraction: f64,
}

pub fn solve_with_admission(s: &Scenario, algorithm: Algorithm) -> Result<AdmittedSolution> {
    match solve(s, algorithm) {
        Ok((mode, eval)) => Ok(AdmittedSolution {
            scenario: s.clone(),
            mode,
            eval,
            feasible_before_admission: true,
            admitted_fraction: 1.0,
        }),
        Err(Error::Infeasible(_)) => {
            let (admitted, a) = admission_control(s, &OperationMode::all_on(s.num_cells()))?;
            let (mode, eval) = solve(&admitted, algorithm)?;
            Ok(AdmittedSolution {
                scenario: admitted,
                mode,
                eval,
                feasible_before_admission: false,
                admitted_fraction: a,
            })
        }
        Err(e) => Err(e),
    }
}

/// Evaluates a fixed mode, thinning the load if it breaks the cap.
fn fixed_mode_with_admission(s: &Scenario, mode: &OperationMode) -> Result<(Evaluation, bool, f64)> {
    let eval = evaluate(s, mode);
    if eval.feasible {
        return Ok((eval, true, 1.0));
    }
    let (admitted, a) = admission_control(s, mode)?;
    Ok((evaluate(&admitted, mode), false, a))
}

/// Activation pattern of the probability-based scheme.
pub fn random_activation(m: usize, p_active: f64, seed: u64, pattern: u64) -> OperationMode {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + pattern);
    OperationMode::new((0..m).map(|_| rng.random::<f64>() < p_active).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda0: f64,
    pub seed: u64,
    pub sigma2: f64,
    pub scheme: Scheme,
    /// `exact` for deterministic schemes, `sampled` for one random activation
    /// pattern, `expected` for the average over activation patterns.
    pub evaluation: &'static str,
    pub p_het_w: f64,
    /// `P̲ + u·P^t`.
    pub mbs_power_w: f64,
    /// `u·P^t`.
    pub mbs_tx_component_w: f64,
    pub sbs_power_w: f64,
    /// Active small cells; mean count for `expected` rows.
    pub active_sbs: f64,
    pub feasible_before_admission: bool,
    pub admitted_fraction: f64,
}

pub const SWEEP_HEADER: &str = "lambda0,seed,sigma2,scheme,evaluation,p_het_w,mbs_power_w,\
mbs_tx_component_w,sbs_power_w,active_sbs,feasible_before_admission,admitted_fraction";

/// Identifies the sweep cell a row belongs to.
#[derive(Debug, Clone, Copy)]
struct RowKey {
    lambda0: f64,
    seed: u64,
    sigma2: f64,
    scheme: Scheme,
}

impl RowKey {
    fn row(
        self,
        evaluation: &'static str,
        s: &Scenario,
        eval: &Evaluation,
        mode: &OperationMode,
        admission: (bool, f64),
    ) -> SweepRow {
        SweepRow {
            lambda0: self.lambda0,
            seed: self.seed,
            sigma2: self.sigma2,
            scheme: self.scheme,
            evaluation,
            p_het_w: eval.p_het,
            mbs_power_w: eval.mbs_power(s),
            mbs_tx_component_w: s.power.u_slope * eval.p_t,
            sbs_power_w: eval.sbs_power(s),
            active_sbs: mode.active_count() as f64,
            feasible_before_admission: admission.0,
            admitted_fraction: admission.1,
        }
    }
}

fn scheme_rows(s: &Scenario, scheme: Scheme, spec: &SweepSpec, seed: u64) -> Result<Vec<SweepRow>> {
    let m = s.num_cells();
    let key = RowKey {
        lambda0: s.lambda0,
        seed,
        sigma2: spec.sigma2,
        scheme,
    };
    Ok(match scheme {
        Scheme::Alg => {
            let sol = solve_with_admission(s, Algorithm::Auto)?;
            let admission = (sol.feasible_before_admission, sol.admitted_fraction);
            vec![key.row("exact", &sol.scenario, &sol.eval, &sol.mode, admission)]
        }
        Scheme::AlwaysOn => {
            let mode = OperationMode::all_on(m);
            let (eval, feasible, a) = fixed_mode_with_admission(s, &mode)?;
            vec![key.row("exact", s, &eval, &mode, (feasible, a))]
        }
        Scheme::ProbOn => {
            let patterns: Vec<(OperationMode, Evaluation, bool, f64)> = (0..PROB_ON_PATTERNS)
                .map(|k| {
                    let mode = random_activation(m, spec.p_active, seed, k);
                    fixed_mode_with_admission(s, &mode).map(|(e, f, a)| (mode, e, f, a))
                })
                .collect::<Result<_>>()?;
            let (mode, eval, feasible, a) = &patterns[0];
            let sampled = key.row("sampled", s, eval, mode, (*feasible, *a));

            let n = patterns.len() as f64;
            let mbs = patterns.iter().map(|p| p.1.mbs_power(s)).sum::<f64>() / n;
            let tx = patterns.iter().map(|p| s.power.u_slope * p.1.p_t).sum::<f64>() / n;
            let pw = &s.power;
            let sbs = m as f64 * (pw.p_sbs_sleep + spec.p_active * pw.delta_p());
            let expected = SweepRow {
                lambda0: key.lambda0,
                seed,
                sigma2: key.sigma2,
                scheme,
                evaluation: "expected",
                p_het_w: mbs + sbs,
                mbs_power_w: mbs,
                mbs_tx_component_w: tx,
                sbs_power_w: sbs,
                active_sbs: m as f64 * spec.p_active,
                feasible_before_admission: patterns.iter().all(|p| p.2),
                admitted_fraction: patterns.iter().map(|p| p.3).sum::<f64>() / n,
            };
            vec![sampled, expected]
        }
    })
}

/// Every scheme at every `(λ0, seed)`; rows follow grid, seed and scheme
/// order of the spec.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let cells: Vec<(f64, u64)> = spec
        .lambda0_grid
        .iter()
        .flat_map(|&l| spec.seeds.iter().map(move |&seed| (l, seed)))
        .collect();
    let per_cell: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(lambda0, seed)| {
            let s = generate_scenario(base, lambda0, spec.sigma2, seed)?;
            let mut rows = Vec::new();
            for &scheme in &spec.schemes {
                rows.extend(scheme_rows(&s, scheme, spec, seed)?);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Six significant digits, shortest round-trip text of the rounded value.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let text = format!("{rounded:?}");
    text.strip_suffix(".0").map(str::to_owned).unwrap_or(text)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            sig6(r.lambda0),
            r.seed,
            sig6(r.sigma2),
            r.scheme.name(),
            r.evaluation,
            sig6(r.p_het_w),
            sig6(r.mbs_power_w),
            sig6(r.mbs_tx_component_w),
            sig6(r.sbs_power_w),
            sig6(r.active_sbs),
            r.feasible_before_admission,
            sig6(r.admitted_fraction),
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table2Row {
    pub lambda0: f64,
    pub sigma2: f64,
    pub n_seeds: usize,
    /// Mean of optimum power over heuristic power.
    pub mean_ratio: f64,
    pub min_ratio: f64,
}

pub const TABLE2_HEADER: &str = "lambda0,sigma2,n_seeds,mean_ratio,min_ratio";

/// Optimum-to-heuristic power ratio per `λ0`, exhaustive search against the
/// location-and-density-based solver on the same (admitted) scenario.
pub fn table2_benchmark(spec: &SweepSpec, base: &Scenario) -> Result<Vec<Table2Row>> {
    spec.validate()?;
    spec.lambda0_grid
        .iter()
        .map(|&lambda0| {
            let ratios: Vec<f64> = spec
                .seeds
                .iter()
                .map(|&seed| {
                    let s = generate_scenario(base, lambda0, spec.sigma2, seed)?;
                    let heuristic = solve_with_admission(&s, Algorithm::Nonuniform)?;
                    let (_, optimum) = exhaustive_search(&heuristic.scenario)?;
                    Ok(optimum.p_het / heuristic.eval.p_het)
                })
                .collect::<Result<_>>()?;
            Ok(Table2Row {
                lambda0,
                sigma2: spec.sigma2,
                n_seeds: ratios.len(),
                mean_ratio: ratios.iter().sum::<f64>() / ratios.len() as f64,
                min_ratio: ratios.iter().copied().fold(f64::INFINITY, f64::min),
            })
        })
        .collect()
}

pub fn table2_csv(rows: &[Table2Row]) -> String {
    let mut out = String::from(TABLE2_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            sig6(r.lambda0),
            sig6(r.sigma2),
            r.n_seeds,
            sig6(r.mean_ratio),
            sig6(r.min_ratio)
        );
    }
    out
}
