use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hetnet_sleep::harness::{
    self, base_scenario, load_sweep_spec, run_sweep, sig6, solve, solve_with_admission, sweep_csv,
    table2_benchmark, table2_csv, Algorithm, Preset,
};
use hetnet_sleep::nonuniform::{classify_regimes, RegimeClassification};
use hetnet_sleep::scenario::{is_uniform, sbs_distances, UNIFORM_TOL};
use hetnet_sleep::uniform::{threshold_lambda_off, threshold_lambda_on};
use hetnet_sleep::validation::{exhaustive_search, monte_carlo_validate, McReport};
use hetnet_sleep::{load_scenario, Error, OperationMode, Scenario};

#[derive(Parser)]
#[command(name = "hetnet", version, about = "Small-cell sleep control for two-tier cellular networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Auto,
    Uniform,
    Nonuniform,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Auto => Algorithm::Auto,
            AlgorithmArg::Uniform => Algorithm::Uniform,
            AlgorithmArg::Nonuniform => Algorithm::Nonuniform,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Choose the small cells to put to sleep.
    Solve {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = AlgorithmArg::Auto)]
        algorithm: AlgorithmArg,
        /// Thin the macro load when even all-on exceeds the transmit cap.
        #[arg(long)]
        admission: bool,
    },
    /// Sweep the macro user density and compare schemes.
    Sweep { spec: PathBuf },
    /// Monte-Carlo check of the transmit-power model for one mode.
    Validate {
        scenario: PathBuf,
        /// Operation mode as a bit string, 1 = active (e.g. 1010).
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 100_000)]
        draws: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Density thresholds of every small cell.
    Thresholds { scenario: PathBuf },
    /// Optimum-to-heuristic power ratios against exhaustive search.
    Table2 { spec: PathBuf },
    /// Exhaustive search over all operation modes.
    Oracle { scenario: PathBuf },
}

#[derive(Serialize)]
struct SolveOutput {
    algorithm: &'static str,
    mode: OperationMode,
    p_het_w: f64,
    p_t_w: f64,
    mbs_power_w: f64,
    sbs_power_w: f64,
    active_sbs: usize,
    feasible_before_admission: bool,
    admitted_fraction: f64,
}

const SOLVE_HEADER: &str =
    "algorithm,mode,p_het_w,p_t_w,mbs_power_w,sbs_power_w,active_sbs,feasible_before_admission,admitted_fraction";

impl SolveOutput {
    fn csv(&self) -> String {
        format!(
            "{SOLVE_HEADER}\n{},{},{},{},{},{},{},{},{}\n",
            self.algorithm,
            self.mode,
            sig6(self.p_het_w),
            sig6(self.p_t_w),
            sig6(self.mbs_power_w),
            sig6(self.sbs_power_w),
            self.active_sbs,
            self.feasible_before_admission,
            sig6(self.admitted_fraction)
        )
    }
}

#[derive(Serialize)]
struct CellThresholds {
    cell: usize,
    distance_m: f64,
    lambda: f64,
    lambda_off: f64,
    lambda_on: f64,
    regime: &'static str,
}

#[derive(Serialize)]
struct ThresholdOutput {
    /// Common density below which all cells sleep.
    uniform_lambda_off: f64,
    /// Common density above which all cells stay active.
    uniform_lambda_on: f64,
    cells: Vec<CellThresholds>,
}

fn regime(r: &RegimeClassification, i: usize) -> &'static str {
    if r.forced_on.contains(&i) {
        "on"
    } else if r.forced_off.contains(&i) {
        "off"
    } else {
        "free"
    }
}

fn thresholds(s: &Scenario) -> hetnet_sleep::Result<ThresholdOutput> {
    let r = classify_regimes(s)?;
    let d = sbs_distances(s);
    Ok(ThresholdOutput {
        uniform_lambda_off: threshold_lambda_off(s)?,
        uniform_lambda_on: threshold_lambda_on(s)?,
        cells: (0..s.num_cells())
            .map(|i| CellThresholds {
                cell: i,
                distance_m: d[i],
                lambda: s.lambdas[i],
                lambda_off: r.lambda_off[i],
                lambda_on: r.lambda_on[i],
                regime: regime(&r, i),
            })
            .collect(),
    })
}

fn thresholds_csv(t: &ThresholdOutput) -> String {
    let mut out = String::from("cell,distance_m,lambda,lambda_off,lambda_on,regime\n");
    let _ = writeln!(
        out,
        "all,,,{},{},",
        sig6(t.uniform_lambda_off),
        sig6(t.uniform_lambda_on)
    );
    for c in &t.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.cell,
            sig6(c.distance_m),
            sig6(c.lambda),
            sig6(c.lambda_off),
            sig6(c.lambda_on),
            c.regime
        );
    }
    out
}

fn report_csv(r: &McReport) -> String {
    format!(
        "p_t_analytic,p_t_empirical_mean,std_error,n_draws,n_users,outage_rate,approx_error_z,seed\n{},{},{},{},{},{},{},{}\n",
        sig6(r.p_t_analytic),
        sig6(r.p_t_empirical_mean),
        sig6(r.std_error),
        r.n_draws,
        r.n_users,
        sig6(r.outage_rate),
        sig6(r.approx_error_z),
        r.seed
    )
}

fn json<T: Serialize>(v: &T) -> hetnet_sleep::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cli: &Cli) -> hetnet_sleep::Result<String> {
    let as_json = cli.format == Format::Json;
    match &cli.command {
        Command::Solve {
            scenario,
            algorithm,
            admission,
        } => {
            let s = load_scenario(scenario)?;
            let algorithm = Algorithm::from(*algorithm);
            let sol = if *admission {
                solve_with_admission(&s, algorithm)?
            } else {
                let (mode, eval) = solve(&s, algorithm)?;
                harness::AdmittedSolution {
                    scenario: s.clone(),
                    mode,
                    eval,
                    feasible_before_admission: true,
                    admitted_fraction: 1.0,
                }
            };
            let uniform = match algorithm {
                Algorithm::Auto => is_uniform(&s, UNIFORM_TOL),
                Algorithm::Uniform => true,
                Algorithm::Nonuniform => false,
            };
            let out = SolveOutput {
                algorithm: if uniform { "location" } else { "location_density" },
                p_het_w: sol.eval.p_het,
                p_t_w: sol.eval.p_t,
                mbs_power_w: sol.eval.mbs_power(&sol.scenario),
                sbs_power_w: sol.eval.sbs_power(&sol.scenario),
                active_sbs: sol.mode.active_count(),
                mode: sol.mode,
                feasible_before_admission: sol.feasible_before_admission,
                admitted_fraction: sol.admitted_fraction,
            };
            if as_json { json(&out) } else { Ok(out.csv()) }
        }
        Command::Sweep { spec } => {
            let spec = load_sweep_spec(spec)?;
            let base = base_scenario(&spec, Preset::Grid144)?;
            let rows = run_sweep(&spec, &base)?;
            if as_json { json(&rows) } else { Ok(sweep_csv(&rows)) }
        }
        Command::Validate {
            scenario,
            mode,
            draws,
            seed,
        } => {
            let s = load_scenario(scenario)?;
            let mode: OperationMode = mode.parse()?;
            if mode.len() != s.num_cells() {
                return Err(Error::Validation(format!(
                    "mode has {} entries, scenario has {} small cells",
                    mode.len(),
                    s.num_cells()
                )));
            }
            let report = monte_carlo_validate(&s, &mode, *draws, *seed)?;
            if as_json { json(&report) } else { Ok(report_csv(&report)) }
        }
        Command::Thresholds { scenario } => {
            let t = thresholds(&load_scenario(scenario)?)?;
            if as_json { json(&t) } else { Ok(thresholds_csv(&t)) }
        }
        Command::Table2 { spec } => {
            let spec = load_sweep_spec(spec)?;
            let base = base_scenario(&spec, Preset::Ring20)?;
            let rows = table2_benchmark(&spec, &base)?;
            if as_json { json(&rows) } else { Ok(table2_csv(&rows)) }
        }
        Command::Oracle { scenario } => {
            let s = load_scenario(scenario)?;
            let (mode, eval) = exhaustive_search(&s)?;
            let out = SolveOutput {
                algorithm: "exhaustive",
                p_het_w: eval.p_het,
                p_t_w: eval.p_t,
                mbs_power_w: eval.mbs_power(&s),
                sbs_power_w: eval.sbs_power(&s),
                active_sbs: mode.active_count(),
                mode,
                feasible_before_admission: true,
                admitted_fraction: 1.0,
            };
            if as_json { json(&out) } else { Ok(out.csv()) }
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::Validation(_) => 2,
        Error::Infeasible(_) => 3,
        Error::TooLarge { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = run(&cli).and_then(|text| match &cli.out {
        Some(path) => fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
