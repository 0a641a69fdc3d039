//! The `surecvlab` command line.
//!
//! Every subcommand reads a flat configuration (see [`crate::config`]),
//! writes one CSV table, and exits with 0 on success, 2 on a configuration
//! error, 3 on a numerical failure and 4 when `--check` finds a mismatch
//! against the bundled reference tables.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use surecvlab_core::cv::{cv_curve, cv_sure_gap, tune_cv, CvMode};
use surecvlab_core::erm::{influence_estimate, Problem, ThetaSource};
use surecvlab_core::linalg::check_covariance;
use surecvlab_core::penalty::{PenaltyKind, PenaltySpec};
use surecvlab_core::prox::prox;
use surecvlab_core::search::{linear_grid, log_grid};
use surecvlab_core::segments::lasso_breakpoints;
use surecvlab_core::structure::sawtooth_profile;
use surecvlab_core::sure::{sure, sure_curve};
use surecvlab_core::tuning::{minimize_sure, sorted_grid, LambdaSet};
use surecvlab_core::{DMatrix, DVector};

use crate::config::Config;
use crate::csvfmt::{Cell, Table};
use crate::dgp::{simulate_dataset, DgpSpec};
use crate::js::{js_risk, JsVariant};
use crate::reference;
use crate::regret::oos_regret;
use crate::study::{risk_cv, risk_sure_limit, McConfig};
use crate::LabError;

const AFTER_HELP: &str = "\
Configuration: flat `key = value` lines (`#` comments); vectors are
comma-separated, matrices use `;` between rows. Unknown keys are rejected.
Common keys: master_seed, output, threads (0 = all cores), preset.
SURECVLAB_SEED overrides master_seed from the file; --set overrides both.

Presets: figure2-ridge, figure2-lasso (sure-landscape, sure-min, prox-eval),
js-figure (risk-curve, js-figure), orthogonal-sawtooth (sawtooth),
convergence (convergence-study).

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 --check mismatch.";

/// Command-line arguments.
#[derive(Debug, Parser)]
#[command(name = "surecvlab", version, about = "SURE and cross-validation tuning studies", after_help = AFTER_HELP)]
pub struct Cli {
    /// Subcommand.
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output CSV path (default: standard output).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Compare against the bundled reference tables; exit 4 on mismatch.
    #[arg(long, global = true)]
    pub check: bool,
    /// Worker threads (0 = all cores). Output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

/// Subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Proximal map over a lambda grid.
    /// Columns: lambda, theta_1..k, g_1..k, eta, boundary.
    /// Keys: penalty, a, theta, lambdas | lambda_min, lambda_max, lambda_points, lambda_spacing.
    ProxEval,
    /// SURE over a lambda grid with local and global minima.
    /// Columns: row_type (curve | local_min | global_min), lambda, sure, sure_figure (= sure + k).
    /// Keys: penalty, a, theta, sigma, lambda grid.
    SureLandscape,
    /// SURE minimiser over [0, inf) or a grid.
    /// Columns: lambda_star, sure, sure_figure, tie_rank, saturated, flat_tail, breakpoint_index.
    /// Keys: penalty, a, theta, sigma, lambda_set (all | grid), lambda grid.
    SureMin,
    /// Leave-one-out CV curve for one simulated dataset.
    /// Columns: lambda, cv, two_cv, sure_sigma_hat, theta_1..k.
    /// Keys: model, theta0, sigma_noise, n, replication, penalty, a, mode, lambda grid.
    CvCurve,
    /// CV-tuned estimator for one simulated dataset.
    /// Columns: lambda_star, grid_index, cv_min, oos_regret, theta_1..k.
    Tune,
    /// CV versus SURE gaps across sample sizes.
    /// Columns: n, replication, raw_gap, centered_gap, argmin_cv, argmin_sure, lambda_star_agrees.
    /// Keys: model, theta0, sigma_noise, sample_sizes, replications, penalty, a, mode, lambda grid.
    ConvergenceStudy,
    /// Risk over a grid of ||theta0||.
    /// Columns: norm_theta, estimator, n (or "limit"), risk, stderr.
    /// Keys: estimators (cv, limit, js-plain, js-positive-part), direction, norms |
    /// norm_min, norm_max, norm_points, axis (norm | per_coordinate), sample_sizes,
    /// replications, truncation_m, normalized, lambda_set, k, model, sigma_noise, penalty, a, mode.
    RiskCurve,
    /// Lasso tuning along a ray theta = R nu.
    /// Columns: r, lambda_star, segment_index, lambda_star_over_r.
    /// Keys: penalty (lasso), a, nu, sigma, r_values | r_min, r_max, r_points.
    Sawtooth,
    /// `risk-curve` with the js-figure preset (James-Stein, k = 10).
    JsFigure,
}

/// A finished command: its table and, under `--check`, the mismatches found.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Output table.
    pub table: Table,
    /// `Some` under `--check`; empty when everything matched.
    pub check_failures: Option<Vec<String>>,
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("surecvlab: {e}");
            e.exit_code()
        }
    }
}

/// Build the configuration from `--config` and `--set`.
pub fn load_config(cli: &Cli) -> Result<Config, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| LabError::Config(format!("cannot read config {}: {e}", p.display())))?;
            Config::parse(&text)?
        }
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.set(s)?;
    }
    Ok(cfg)
}

/// Run a parsed command line: execute and write the table.
pub fn run(cli: &Cli) -> Result<(), LabError> {
    let cfg = load_config(cli)?;
    let seed_from_cli = cli.set.iter().any(|s| s.trim_start().starts_with("master_seed"));
    let threads = match cli.threads {
        Some(t) => {
            cfg.usize_min("threads", 0, 0)?;
            t
        }
        None => cfg.usize_min("threads", 0, 0)?,
    };
    let out_key = cfg.opt_string("output");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| execute(cli.command, &cfg, seed_from_cli, cli.check))?;
    let out = cli.out.clone().or(out_key.map(PathBuf::from));
    match out {
        Some(p) => {
            let f = std::fs::File::create(&p)?;
            outcome.table.write(std::io::BufWriter::new(f))?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            outcome.table.write(&mut lock)?;
            lock.flush()?;
        }
    }
    match outcome.check_failures {
        Some(f) if !f.is_empty() => Err(LabError::Check(format!("{} mismatch(es); first: {}", f.len(), f[0]))),
        _ => Ok(()),
    }
}

/// Execute `command` against a configuration. `threads` and `output` keys
/// are accepted but handled by [`run`].
pub fn execute(command: Command, cfg: &Config, seed_from_cli: bool, check: bool) -> Result<Outcome, LabError> {
    cfg.reject_outside(KNOWN_KEYS)?;
    let mut cfg_preset = Config::default();
    let cfg = apply_preset(command, cfg, &mut cfg_preset)?;
    cfg.opt_string("threads");
    cfg.opt_string("output");
    let seed = cfg.master_seed(seed_from_cli, 1)?;
    match command {
        Command::ProxEval => prox_eval(cfg, check),
        Command::SureLandscape => sure_landscape(cfg, check),
        Command::SureMin => sure_min(cfg, check),
        Command::CvCurve => cv_curve_cmd(cfg, seed, check),
        Command::Tune => tune_cmd(cfg, seed, check),
        Command::ConvergenceStudy => convergence_study(cfg, seed, check),
        Command::RiskCurve | Command::JsFigure => risk_curve(cfg, seed, check),
        Command::Sawtooth => sawtooth(cfg, check),
    }
}

/// Every key any command understands. Keys outside this list are reported
/// before anything else; keys a particular command ignores are reported
/// after its own parameters have been read.
pub const KNOWN_KEYS: &[&str] = &[
    "a", "axis", "direction", "estimators", "k", "lambda_max", "lambda_min", "lambda_points",
    "lambda_set", "lambda_spacing", "lambdas", "master_seed", "mode", "model", "n", "norm_max",
    "norm_min", "norm_points", "normalized", "norms", "nu", "output", "penalty", "preset", "r_max",
    "r_min", "r_points", "r_values", "replication", "replications", "sample_sizes", "sigma",
    "sigma_noise", "theta", "theta0", "threads", "truncation_m",
];

const FIG2_LASSO_THETA: &str = "0.3535533905932738, 1.0606601717798212, 2";

fn preset_defaults(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "figure2-ridge" => &[
            ("penalty", "ridge"),
            ("a", "1, 0; 0, 40"),
            ("theta", "1.3893, 1.5"),
            ("lambda_min", "0"),
            ("lambda_max", "49.8"),
            ("lambda_points", "250"),
        ],
        "figure2-lasso" => &[
            ("penalty", "lasso"),
            ("theta", FIG2_LASSO_THETA),
            ("lambda_min", "0"),
            ("lambda_max", "2.45"),
            ("lambda_points", "491"),
        ],
        "js-figure" => &[
            ("estimators", "js-plain"),
            ("k", "10"),
            ("axis", "per_coordinate"),
            ("norm_min", "0"),
            ("norm_max", "6"),
            ("norm_points", "61"),
            ("replications", "1000000"),
        ],
        "orthogonal-sawtooth" => &[
            ("penalty", "lasso"),
            ("nu", FIG2_LASSO_THETA),
            ("r_min", "0.05"),
            ("r_max", "4"),
            ("r_points", "80"),
        ],
        "convergence" => &[
            ("model", "linear"),
            ("theta0", "1, 0.5"),
            ("sigma_noise", "1"),
            ("penalty", "ridge"),
            ("sample_sizes", "200, 800"),
            ("replications", "100"),
            ("mode", "exact"),
            ("lambda_min", "0.01"),
            ("lambda_max", "100"),
            ("lambda_points", "20"),
            ("lambda_spacing", "log"),
        ],
        _ => return None,
    })
}

/// The configuration with preset defaults filled in (keys already present win).
fn apply_preset<'a>(command: Command, cfg: &'a Config, scratch: &'a mut Config) -> Result<&'a Config, LabError> {
    let name = match (cfg.opt_string("preset"), command) {
        (Some(p), _) => p,
        (None, Command::JsFigure) => "js-figure".to_string(),
        (None, _) => return Ok(cfg),
    };
    let defaults = preset_defaults(&name).ok_or_else(|| LabError::Config(format!("unknown preset '{name}'")))?;
    let fits = match name.as_str() {
        "figure2-ridge" | "figure2-lasso" => {
            matches!(command, Command::SureLandscape | Command::SureMin | Command::ProxEval)
        }
        "js-figure" => matches!(command, Command::RiskCurve | Command::JsFigure),
        "orthogonal-sawtooth" => command == Command::Sawtooth,
        _ => command == Command::ConvergenceStudy,
    };
    if !fits {
        return Err(LabError::Config(format!("preset '{name}' does not apply to this command")));
    }
    *scratch = cfg.clone_values();
    for (k, v) in defaults {
        scratch.set_default(k, v);
    }
    scratch.set_default("preset", &name);
    scratch.opt_string("preset");
    Ok(scratch)
}

fn no_reference(cmd: &str) -> LabError {
    LabError::Config(format!("--check: no reference table exists for {cmd} with this configuration"))
}

/// Core errors during input construction are configuration errors.
fn cfg_err(e: surecvlab_core::Error) -> LabError {
    LabError::Config(e.to_string())
}

fn penalty(cfg: &Config, k: usize) -> Result<PenaltySpec, LabError> {
    let kind = cfg.choice("penalty", "ridge", &["ridge", "lasso"])?;
    let a = cfg.opt_matrix("a", k)?.unwrap_or_else(|| DMatrix::identity(k, k));
    let p = if kind == "ridge" { PenaltySpec::ridge(a) } else { PenaltySpec::lasso(a) };
    p.map_err(cfg_err)
}

fn sigma(cfg: &Config, k: usize) -> Result<DMatrix<f64>, LabError> {
    let s = cfg.opt_matrix("sigma", k)?.unwrap_or_else(|| DMatrix::identity(k, k));
    check_covariance(&s, k).map_err(cfg_err)?;
    Ok(s)
}

fn lambda_grid(cfg: &Config) -> Result<Vec<f64>, LabError> {
    let grid = match cfg.opt_vec("lambdas")? {
        Some(v) => v,
        None => {
            let spacing = cfg.choice("lambda_spacing", "linear", &["linear", "log"])?;
            let points = cfg.usize_min("lambda_points", 50, 1)?;
            if spacing == "log" {
                let lo = cfg.f64_in("lambda_min", 1e-3, f64::MIN_POSITIVE, f64::MAX)?;
                let hi = cfg.f64_in("lambda_max", 1e3, lo, f64::MAX)?;
                log_grid(lo, hi, points)
            } else {
                let lo = cfg.f64_in("lambda_min", 0.0, 0.0, f64::MAX)?;
                let hi = cfg.f64_in("lambda_max", 10.0, lo, f64::MAX)?;
                linear_grid(lo, hi, points)
            }
        }
    };
    sorted_grid(&grid).map_err(|e| LabError::Config(format!("lambda grid: {e}")))
}

fn vec_len_match(v: &DVector<f64>, key: &str) -> Result<usize, LabError> {
    if v.is_empty() {
        return Err(LabError::Config(format!("key '{key}': empty vector")));
    }
    Ok(v.len())
}

fn eta_string(eta: &[i8]) -> String {
    eta.iter().map(|&s| match s.cmp(&0) {
        std::cmp::Ordering::Greater => '+',
        std::cmp::Ordering::Less => '-',
        std::cmp::Ordering::Equal => '0',
    }).collect()
}

fn indexed(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}_{j}")).collect()
}

fn table_with(fixed: &[&str], extra: &[String], tail: &[&str]) -> Table {
    let mut t = Table::new(fixed);
    t.header.extend(extra.iter().cloned());
    t.header.extend(tail.iter().map(|s| s.to_string()));
    t
}

fn prox_eval(cfg: &Config, check: bool) -> Result<Outcome, LabError> {
    let theta = cfg.vector("theta")?;
    let k = vec_len_match(&theta, "theta")?;
    let pen = penalty(cfg, k)?;
    let grid = lambda_grid(cfg)?;
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    if check {
        return Err(no_reference("prox-eval"));
    }
    let mut cols = indexed("theta", k);
    cols.extend(indexed("g", k));
    let mut t = table_with(&["lambda"], &cols, &["eta", "boundary"]);
    for &l in &grid {
        let p = prox(&pen, l, &theta)?;
        let mut row: Vec<Cell> = vec![l.into()];
        row.extend(theta.iter().map(|&x| Cell::Num(x)));
        row.extend(p.g.iter().map(|&x| Cell::Num(x)));
        let eta = if pen.kind() == PenaltyKind::Ridge { String::new() } else { eta_string(&p.eta) };
        row.push(eta.into());
        row.push(p.boundary.into());
        t.push(row);
    }
    Ok(Outcome { table: t, check_failures: None })
}

fn sure_landscape(cfg: &Config, check: bool) -> Result<Outcome, LabError> {
    let theta = cfg.vector("theta")?;
    let k = vec_len_match(&theta, "theta")?;
    let pen = penalty(cfg, k)?;
    let sig = sigma(cfg, k)?;
    let grid = lambda_grid(cfg)?;
    let preset = cfg.opt_string("preset");
    cfg.reject_unused()?;
    let kf = k as f64;
    let curve = sure_curve(&pen, &theta, &sig, &grid)?;
    let mut t = Table::new(&["row_type", "lambda", "sure", "sure_figure"]);
    for (&l, &v) in curve.lambdas.iter().zip(&curve.values) {
        t.push(vec!["curve".into(), l.into(), v.into(), (v + kf).into()]);
    }
    let local = curve.local_minima();
    for &i in &local {
        let v = curve.values[i];
        t.push(vec!["local_min".into(), curve.lambdas[i].into(), v.into(), (v + kf).into()]);
    }
    let min = minimize_sure(&pen, &theta, &sig, &LambdaSet::AllNonneg)?;
    let mut global = Vec::new();
    for &l in &min.ties {
        let v = sure(&pen, l, &theta, &sig)?;
        global.push((l, v));
        t.push(vec!["global_min".into(), l.into(), v.into(), (v + kf).into()]);
    }
    let check_failures = if check {
        let mut fails = Vec::new();
        let (table, kinks) = match preset.as_deref() {
            Some("figure2-ridge") => {
                if local.len() != 2 {
                    fails.push(format!("expected 2 local minima, found {}", local.len()));
                }
                (reference::FIGURE2_RIDGE, Vec::new())
            }
            Some("figure2-lasso") => {
                if global.len() != 2 {
                    fails.push(format!("expected 2 global minima, found {}", global.len()));
                } else if (global[0].1 - global[1].1).abs() > 1e-9 {
                    fails.push(format!("global minima differ: {} vs {}", global[0].1, global[1].1));
                }
                (reference::FIGURE2_LASSO, lasso_breakpoints(&pen, &theta)?.breakpoints)
            }
            _ => return Err(no_reference("sure-landscape")),
        };
        // reference values are left limits at Lasso kinks; ours are right limits
        for (l, fig) in reference::pairs(table) {
            if kinks.iter().any(|b| (b - l).abs() <= 1e-9) {
                continue;
            }
            let ours = sure(&pen, l, &theta, &sig)? + kf;
            if (ours - fig).abs() > 1e-8 * fig.abs().max(1.0) {
                fails.push(format!("lambda = {l}: {ours} vs reference {fig}"));
            }
        }
        Some(fails)
    } else {
        None
    };
    Ok(Outcome { table: t, check_failures })
}

fn sure_min(cfg: &Config, check: bool) -> Result<Outcome, LabError> {
    let theta = cfg.vector("theta")?;
    let k = vec_len_match(&theta, "theta")?;
    let pen = penalty(cfg, k)?;
    let sig = sigma(cfg, k)?;
    let set = match cfg.choice("lambda_set", "all", &["all", "grid"])?.as_str() {
        "grid" => LambdaSet::FiniteGrid(lambda_grid(cfg)?),
        _ => {
            // grid keys (e.g. from a preset) are allowed but unused
            for key in ["lambdas", "lambda_min", "lambda_max", "lambda_points", "lambda_spacing"] {
                cfg.opt_string(key);
            }
            LambdaSet::AllNonneg
        }
    };
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    if check {
        return Err(no_reference("sure-min"));
    }
    let m = minimize_sure(&pen, &theta, &sig, &set)?;
    let mut t = Table::new(&["lambda_star", "sure", "sure_figure", "tie_rank", "saturated", "flat_tail", "breakpoint_index"]);
    for (rank, &l) in m.ties.iter().enumerate() {
        let v = match &set {
            LambdaSet::AllNonneg => sure(&pen, l, &theta, &sig)?,
            LambdaSet::FiniteGrid(_) => m.candidates.iter().find(|c| c.0 == l).map(|c| c.1).unwrap_or(m.sure_star),
        };
        let bp = if rank == 0 { m.breakpoint_index.map(Cell::from).unwrap_or_else(|| "".into()) } else { "".into() };
        t.push(vec![l.into(), v.into(), (v + k as f64).into(), rank.into(), m.saturated.into(), m.flat_tail.into(), bp]);
    }
    Ok(Outcome { table: t, check_failures: None })
}

struct DgpArgs {
    dgp: DgpSpec,
    pen: PenaltySpec,
    grid: Vec<f64>,
    mode: CvMode,
}

fn dgp_args(cfg: &Config) -> Result<DgpArgs, LabError> {
    let theta0 = cfg.vector("theta0")?;
    let k = vec_len_match(&theta0, "theta0")?;
    let model = cfg.choice("model", "linear", &["linear", "logistic"])?;
    let sigma_noise = cfg.f64_in("sigma_noise", 1.0, f64::MIN_POSITIVE, f64::MAX)?;
    let dgp = if model == "linear" { DgpSpec::linear(theta0, sigma_noise) } else { DgpSpec::logistic(theta0) };
    let pen = penalty(cfg, k)?;
    let grid = lambda_grid(cfg)?;
    let mode = match cfg.choice("mode", "exact", &["exact", "approx"])?.as_str() {
        "approx" => CvMode::ApproxLoo,
        _ => CvMode::ExactLoo,
    };
    Ok(DgpArgs { dgp, pen, grid, mode })
}

fn sample_size(cfg: &Config, k: usize) -> Result<usize, LabError> {
    let n = cfg.usize_min("n", 200, 1)?;
    if n <= k {
        return Err(LabError::Config(format!("key 'n': sample size {n} must exceed k = {k}")));
    }
    Ok(n)
}

fn cv_curve_cmd(cfg: &Config, seed: u64, check: bool) -> Result<Outcome, LabError> {
    let d = dgp_args(cfg)?;
    let k = d.dgp.k();
    let n = sample_size(cfg, k)?;
    let rep = cfg.u64("replication", 0)?;
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    if check {
        return Err(no_reference("cv-curve"));
    }
    let data = simulate_dataset(&d.dgp, n, seed, rep)?;
    let curve = cv_curve(d.dgp.model, &data, &d.pen, &d.grid, d.mode)?;
    let theta_hat = Problem::new(d.dgp.model, &data)?.fit_erm(None)?;
    let sigma_hat = influence_estimate(d.dgp.model, &data, &d.dgp.local_theta0(n), ThetaSource::Known)?.sigma_hat;
    let mut t = table_with(&["lambda", "cv", "two_cv", "sure_sigma_hat"], &indexed("theta", k), &[]);
    for (j, &l) in curve.lambdas.iter().enumerate() {
        let s = sure(&d.pen, l, &theta_hat, &sigma_hat)?;
        let mut row: Vec<Cell> = vec![l.into(), curve.values[j].into(), (2.0 * curve.values[j]).into(), s.into()];
        row.extend(curve.fits[j].iter().map(|&x| Cell::Num(x)));
        t.push(row);
    }
    Ok(Outcome { table: t, check_failures: None })
}

fn tune_cmd(cfg: &Config, seed: u64, check: bool) -> Result<Outcome, LabError> {
    let d = dgp_args(cfg)?;
    let k = d.dgp.k();
    let n = sample_size(cfg, k)?;
    let rep = cfg.u64("replication", 0)?;
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    if check {
        return Err(no_reference("tune"));
    }
    let data = simulate_dataset(&d.dgp, n, seed, rep)?;
    let tuned = tune_cv(d.dgp.model, &data, &d.pen, &d.grid, d.mode)?;
    let regret = oos_regret(&d.dgp, n, &tuned.theta_star)?;
    let mut t = table_with(&["lambda_star", "grid_index", "cv_min", "oos_regret"], &indexed("theta", k), &[]);
    let mut row: Vec<Cell> =
        vec![tuned.lambda_star.into(), tuned.index.into(), tuned.curve.values[tuned.index].into(), regret.into()];
    row.extend(tuned.theta_star.iter().map(|&x| Cell::Num(x)));
    t.push(row);
    Ok(Outcome { table: t, check_failures: None })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Required ratio of median centered gaps between the smallest and the
/// largest sample size when `--check` runs a convergence study.
pub const GAP_SHRINK_FACTOR: f64 = 1.5;

fn convergence_study(cfg: &Config, seed: u64, check: bool) -> Result<Outcome, LabError> {
    let d = dgp_args(cfg)?;
    let k = d.dgp.k();
    let sizes = cfg.opt_usizes("sample_sizes")?.unwrap_or_else(|| vec![200, 800]);
    let reps = cfg.usize_min("replications", 100, 1)?;
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    if sizes.is_empty() {
        return Err(LabError::Config("key 'sample_sizes': empty".into()));
    }
    if let Some(&n) = sizes.iter().find(|&&n| n <= k) {
        return Err(LabError::Config(format!("key 'sample_sizes': n = {n} must exceed k = {k}")));
    }
    let sigma_true = d.dgp.limit_sigma()?;
    let mut t = Table::new(&["n", "replication", "raw_gap", "centered_gap", "argmin_cv", "argmin_sure", "lambda_star_agrees"]);
    let mut medians = Vec::new();
    for &n in &sizes {
        let theta0 = d.dgp.local_theta0(n);
        let reports = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let data = simulate_dataset(&d.dgp, n, seed, r)?;
                Ok(cv_sure_gap(d.dgp.model, &data, &d.pen, &d.grid, d.mode, &theta0, Some(&sigma_true))?)
            })
            .collect::<Result<Vec<_>, LabError>>()?;
        let mut centered = Vec::with_capacity(reps);
        for (r, g) in reports.iter().enumerate() {
            centered.push(g.centered_gap);
            t.push(vec![
                n.into(),
                r.into(),
                g.raw_gap.into(),
                g.centered_gap.into(),
                g.argmin_cv.into(),
                g.argmin_sure.into(),
                (g.argmin_cv == g.argmin_sure).into(),
            ]);
        }
        medians.push(median(&mut centered));
    }
    let check_failures = if check {
        if sizes.len() < 2 {
            return Err(no_reference("convergence-study"));
        }
        let (first, last) = (medians[0], medians[medians.len() - 1]);
        let mut f = Vec::new();
        if last > first / GAP_SHRINK_FACTOR {
            f.push(format!("median centered gap {last} at n = {} exceeds {first} / {GAP_SHRINK_FACTOR}", sizes[sizes.len() - 1]));
        }
        Some(f)
    } else {
        None
    };
    Ok(Outcome { table: t, check_failures })
}

/// Per-point tolerance of the James-Stein figure check.
pub const JS_FIGURE_TOL: f64 = 0.01;

fn risk_curve(cfg: &Config, seed: u64, check: bool) -> Result<Outcome, LabError> {
    let estimators: Vec<String> =
        cfg.string("estimators", "limit").split(',').map(|s| s.trim().to_string()).collect();
    for e in &estimators {
        if !["cv", "limit", "js-plain", "js-positive-part"].contains(&e.as_str()) {
            return Err(LabError::Config(format!("key 'estimators': unknown estimator '{e}'")));
        }
    }
    let needs_dgp = estimators.iter().any(|e| e == "cv" || e == "limit");
    let axis = cfg.choice("axis", "norm", &["norm", "per_coordinate"])?;
    let norms = match cfg.opt_vec("norms")? {
        Some(v) => v,
        None => {
            let lo = cfg.f64_in("norm_min", 0.0, 0.0, f64::MAX)?;
            let hi = cfg.f64_in("norm_max", 6.0, lo, f64::MAX)?;
            linear_grid(lo, hi, cfg.usize_min("norm_points", 13, 1)?)
        }
    };
    if norms.is_empty() || norms.iter().any(|&x| x < 0.0) {
        return Err(LabError::Config("norm grid must be non-empty and non-negative".into()));
    }
    let reps = cfg.usize_min("replications", 2000, 1)?;
    let m = cfg.f64_in("truncation_m", crate::study::DEFAULT_TRUNCATION, f64::MIN_POSITIVE, f64::MAX)?;
    let normalized = cfg.bool("normalized", false)?;
    struct Problem2 {
        nu: DVector<f64>,
        model: String,
        sigma_noise: f64,
        pen: PenaltySpec,
        grid: Vec<f64>,
        mode: CvMode,
        set: LambdaSet,
        sizes: Vec<usize>,
    }
    let (k, prob) = if needs_dgp {
        let nu = cfg.vector("direction")?;
        let k = vec_len_match(&nu, "direction")?;
        let nrm = nu.norm();
        if !(nrm > 0.0) {
            return Err(LabError::Config("key 'direction': must be non-zero".into()));
        }
        let model = cfg.choice("model", "linear", &["linear", "logistic"])?;
        let sigma_noise = cfg.f64_in("sigma_noise", 1.0, f64::MIN_POSITIVE, f64::MAX)?;
        let pen = penalty(cfg, k)?;
        let grid = lambda_grid(cfg)?;
        let mode = match cfg.choice("mode", "approx", &["exact", "approx"])?.as_str() {
            "exact" => CvMode::ExactLoo,
            _ => CvMode::ApproxLoo,
        };
        let set = match cfg.choice("lambda_set", "grid", &["all", "grid"])?.as_str() {
            "all" => LambdaSet::AllNonneg,
            _ => LambdaSet::FiniteGrid(grid.clone()),
        };
        let sizes = cfg.opt_usizes("sample_sizes")?.unwrap_or_else(|| vec![400]);
        if estimators.iter().any(|e| e == "cv") {
            if let Some(&n) = sizes.iter().find(|&&n| n <= k) {
                return Err(LabError::Config(format!("key 'sample_sizes': n = {n} must exceed k = {k}")));
            }
        }
        if cfg.contains("k") && cfg.usize_min("k", k, 1)? != k {
            return Err(LabError::Config("key 'k' disagrees with the direction's length".into()));
        }
        (k, Some(Problem2 { nu: nu / nrm, model, sigma_noise, pen, grid, mode, set, sizes }))
    } else {
        (cfg.usize_min("k", 10, 3)?, None)
    };
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    let scale = if axis == "per_coordinate" { (k as f64).sqrt() } else { 1.0 };
    let norm_k = if normalized { 2.0 / k as f64 } else { 1.0 };
    let mut t = Table::new(&["norm_theta", "estimator", "n", "risk", "stderr"]);
    let mut js_rows = Vec::new();
    // common random numbers across the grid: every point uses the same seed
    for &x in &norms {
        let norm = x * scale;
        for est in &estimators {
            match est.as_str() {
                "js-plain" | "js-positive-part" => {
                    let variant = if est == "js-plain" { JsVariant::Plain } else { JsVariant::PositivePart };
                    let r = js_risk(norm, k, variant, reps, seed)?;
                    js_rows.push((x, r.risk));
                    t.push(vec![x.into(), est.as_str().into(), "limit".into(), r.risk.into(), r.stderr.into()]);
                }
                "limit" => {
                    let p = prob.as_ref().expect("dgp parsed");
                    let dgp = make_dgp(&p.model, &p.nu * norm, p.sigma_noise);
                    let mc = McConfig { sample_sizes: vec![], replications: reps, master_seed: seed, truncation_m: m };
                    let r = risk_sure_limit(&dgp.theta0, &dgp.limit_sigma()?, &p.pen, &p.set, &mc)?;
                    t.push(vec![x.into(), "limit".into(), "limit".into(), (r.mean * norm_k).into(), (r.stderr * norm_k).into()]);
                }
                "cv" => {
                    let p = prob.as_ref().expect("dgp parsed");
                    let dgp = make_dgp(&p.model, &p.nu * norm, p.sigma_noise);
                    for &n in &p.sizes {
                        let mc = McConfig { sample_sizes: vec![n], replications: reps, master_seed: seed, truncation_m: m };
                        let r = risk_cv(&dgp, n, &p.pen, &p.grid, p.mode, &mc)?;
                        t.push(vec![x.into(), "cv".into(), n.into(), (r.mean * norm_k).into(), (r.stderr * norm_k).into()]);
                    }
                }
                _ => unreachable!("validated above"),
            }
        }
    }
    let check_failures = if check {
        if js_rows.is_empty() || axis != "per_coordinate" || k != 10 {
            return Err(no_reference("risk-curve"));
        }
        let refs = reference::pairs(reference::JS_FIGURE);
        let mut f = Vec::new();
        let mut matched = 0;
        for (x, risk) in js_rows {
            if let Some(&(_, want)) = refs.iter().find(|r| (r.0 - x).abs() < 1e-9) {
                matched += 1;
                if (risk - want).abs() > JS_FIGURE_TOL {
                    f.push(format!("norm_theta = {x}: {risk} vs reference {want}"));
                }
            }
        }
        if matched == 0 {
            f.push("no grid point coincides with the reference table".into());
        }
        Some(f)
    } else {
        None
    };
    Ok(Outcome { table: t, check_failures })
}

fn make_dgp(model: &str, theta0: DVector<f64>, sigma_noise: f64) -> DgpSpec {
    if model == "logistic" {
        DgpSpec::logistic(theta0)
    } else {
        DgpSpec::linear(theta0, sigma_noise)
    }
}

fn sawtooth(cfg: &Config, check: bool) -> Result<Outcome, LabError> {
    let nu = cfg.vector("nu")?;
    let k = vec_len_match(&nu, "nu")?;
    let pen = penalty(cfg, k)?;
    if pen.kind() != PenaltyKind::Lasso {
        return Err(LabError::Config("sawtooth requires penalty = lasso".into()));
    }
    let sig = sigma(cfg, k)?;
    let rs = match cfg.opt_vec("r_values")? {
        Some(v) => v,
        None => {
            let lo = cfg.f64_in("r_min", 0.1, 0.0, f64::MAX)?;
            let hi = cfg.f64_in("r_max", 4.0, lo, f64::MAX)?;
            linear_grid(lo, hi, cfg.usize_min("r_points", 40, 1)?)
        }
    };
    if rs.is_empty() || rs.iter().any(|&r| r < 0.0) || rs.windows(2).any(|w| w[1] < w[0]) {
        return Err(LabError::Config("R grid must be non-empty, non-negative and non-decreasing".into()));
    }
    cfg.opt_string("preset");
    cfg.reject_unused()?;
    let profile = sawtooth_profile(&pen, &nu, &rs, &sig)?;
    let mut t = Table::new(&["r", "lambda_star", "segment_index", "lambda_star_over_r"]);
    for p in &profile {
        t.push(vec![p.r.into(), p.lambda_star.into(), p.segment_index.into(), p.lambda_over_r().into()]);
    }
    let check_failures = check.then(|| {
        profile
            .windows(2)
            .filter(|w| w[1].segment_index > w[0].segment_index)
            .map(|w| format!("segment index rises from {} to {} at R = {}", w[0].segment_index, w[1].segment_index, w[1].r))
            .collect()
    });
    Ok(Outcome { table: t, check_failures })
}
