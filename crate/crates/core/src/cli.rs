//! Command-line front end: experiment runs, method comparison, standalone
//! min-norm and duality checks, and gradient sampling.
//!
//! An experiment is described by a flat JSON config whose keys match the
//! long flags (`eps_min` ↔ `--eps-min`); flags override the file and
//! `SETGRAD_SEED` overrides the seed. Exit codes: 0 success, 2 invalid
//! configuration (a JSON list of every violated field on stderr), 3 solver
//! failure (any partial trace is still written).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::descent::{
    naive_subgradient_run, run_descent, DescentConfig, FieldViolation, HullMode, PartialRun,
    Trajectory,
};
use crate::error::Error;
use crate::hull::{sample_ball_gradients_par, support_unchecked, HullSet, Provenance};
use crate::minnorm::{min_dual_norm_point, sphere_directions, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::norms::NormSpec;
use crate::oracles::{builtin, FunctionOracle, PiecewiseAffine};
use crate::region::{BallRegion, Region};
use crate::trace;

pub const EXIT_INVALID_CONFIG: u8 = 2;
pub const EXIT_SOLVER_FAILURE: u8 = 3;

pub const SEED_ENV: &str = "SETGRAD_SEED";

#[derive(Debug, Parser)]
#[command(name = "setgrad", version, about = "Gradients on sets and steepest descent for nonsmooth functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an experiment (descent, naive, compare, min-norm or duality-check).
    Run(ExperimentArgs),
    /// Set-gradient descent against the naive baseline on the same problem.
    Compare(ExperimentArgs),
    /// Minimal dual-norm point of the hull of a CSV point set.
    MinNorm(PointsArgs),
    /// Compare min-norm value with the inf of the support function over
    /// sampled unit directions.
    DualityCheck(PointsArgs),
    /// Gradients of a function sampled on a ball (or its exact hull).
    SampleGrad(SampleArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Csv,
}

#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    /// JSON config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "function", alias = "fn")]
    pub function: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    /// Shorthand for the valley parameter.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// descent | naive | compare | min-norm | duality-check
    #[arg(long)]
    pub mode: Option<String>,
    /// Trace CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the JSON summary here.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long, alias = "eps")]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub eps_min: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub armijo: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub norm: Option<String>,
    /// auto | exact | sampled
    #[arg(long)]
    pub hull: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Naive method step length.
    #[arg(long)]
    pub step: Option<f64>,
    /// Naive method iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    /// Point CSV for the min-norm and duality-check modes.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Unit directions sampled by duality-check.
    #[arg(long)]
    pub directions: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Args)]
pub struct PointsArgs {
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value = "euclidean")]
    pub norm: String,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Unit directions sampled by duality-check.
    #[arg(long, default_value_t = 10_000)]
    pub directions: usize,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long = "function", alias = "fn")]
    pub function: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Ball center.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    /// Ball radius.
    #[arg(long, alias = "eps")]
    pub eps0: f64,
    #[arg(long, default_value = "euclidean")]
    pub norm: String,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Exact generalized gradient instead of samples.
    #[arg(long)]
    pub exact: bool,
    /// Hull CSV path (stdout otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Descent,
    Naive,
    Compare,
    MinNorm,
    DualityCheck,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "descent" => Mode::Descent,
            "naive" => Mode::Naive,
            "compare" => Mode::Compare,
            "min-norm" => Mode::MinNorm,
            "duality-check" => Mode::DualityCheck,
            _ => {
                return Err(format!(
                    "unknown mode `{s}` (descent, naive, compare, min-norm, duality-check)"
                ))
            }
        })
    }
}

/// The experiment config file, before validation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: Option<String>,
    pub params: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub mode: Option<String>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub eps0: Option<f64>,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub eps_min: Option<f64>,
    pub samples: Option<usize>,
    pub armijo: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub norm: Option<String>,
    pub hull: Option<String>,
    pub workers: Option<usize>,
    pub step: Option<f64>,
    pub iters: Option<usize>,
    pub points: Option<PathBuf>,
    pub directions: Option<usize>,
}

pub const DEFAULT_NAIVE_STEP: f64 = 0.05;
pub const DEFAULT_NAIVE_ITERS: usize = 50;
pub const DEFAULT_DIRECTIONS: usize = 10_000;

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub mode: Mode,
    pub oracle: Option<PiecewiseAffine>,
    pub x0: Vec<f64>,
    pub descent: DescentConfig,
    pub step: f64,
    /// Naive iterations; in compare mode `None` means "same as descent".
    pub iters: Option<usize>,
    pub points: Option<HullSet>,
    pub directions: usize,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Vec<FieldViolation>> {
        serde_json::from_str(text).map_err(|e| vec![FieldViolation::new("config", e.to_string())])
    }

    pub fn from_file(path: &Path) -> Result<Self, Vec<FieldViolation>> {
        let text = fs::read_to_string(path)
            .map_err(|e| vec![FieldViolation::new("config", format!("{}: {e}", path.display()))])?;
        Self::from_json(&text)
    }

    /// Overwrite with every flag that was given.
    pub fn apply(&mut self, a: &ExperimentArgs) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &a.$f {
                    self.$f = Some(v.clone());
                }
            )*};
        }
        take!(
            function, params, alpha, x0, mode, out, summary, eps0, theta, sigma, eps_min, samples,
            armijo, max_iter, seed, norm, hull, workers, step, iters, points, directions
        );
    }

    /// Apply `SETGRAD_SEED` if set.
    pub fn apply_env(&mut self, value: Option<&str>) -> Result<(), FieldViolation> {
        if let Some(s) = value {
            let seed = s
                .trim()
                .parse()
                .map_err(|_| FieldViolation::new(SEED_ENV, format!("not a u64: `{s}`")))?;
            self.seed = Some(seed);
        }
        Ok(())
    }

    /// Validate everything, reporting every violated field.
    pub fn validate(&self) -> Result<Experiment, Vec<FieldViolation>> {
        let mut bad = Vec::new();
        let mode = match self.mode.as_deref().unwrap_or("descent").parse::<Mode>() {
            Ok(m) => m,
            Err(e) => {
                bad.push(FieldViolation::new("mode", e));
                Mode::Descent
            }
        };
        let needs_function = matches!(mode, Mode::Descent | Mode::Naive | Mode::Compare);

        let defaults = DescentConfig::default();
        let mut descent = DescentConfig {
            eps0: self.eps0.unwrap_or(defaults.eps0),
            theta: self.theta.unwrap_or(defaults.theta),
            sigma: self.sigma.or(defaults.sigma),
            eps_min: self.eps_min.unwrap_or(defaults.eps_min),
            samples: self.samples.unwrap_or(defaults.samples),
            armijo: self.armijo.unwrap_or(defaults.armijo),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
            seed: self.seed.unwrap_or(defaults.seed),
            norm: defaults.norm,
            hull: defaults.hull,
            workers: self.workers.unwrap_or(defaults.workers),
        };
        if let Some(n) = &self.norm {
            match n.parse::<NormSpec>().and_then(|n| n.validate().map(|_| n)) {
                Ok(n) => descent.norm = n,
                Err(e) => bad.push(FieldViolation::new("norm", e.to_string())),
            }
        }
        if let Some(h) = &self.hull {
            match h.as_str() {
                "auto" => descent.hull = HullMode::Auto,
                "exact" => descent.hull = HullMode::Exact,
                "sampled" => descent.hull = HullMode::Sampled,
                other => bad.push(FieldViolation::new(
                    "hull",
                    format!("unknown hull mode `{other}` (auto, exact, sampled)"),
                )),
            }
        }
        if needs_function {
            bad.extend(descent.violations().into_iter().filter(|v| v.field != "norm"));
        }

        let mut oracle = None;
        if needs_function {
            let params = match (&self.params, self.alpha) {
                (Some(p), Some(_)) if !p.is_empty() => {
                    bad.push(FieldViolation::new("alpha", "give either alpha or params, not both"));
                    p.clone()
                }
                (_, Some(a)) => vec![a],
                (p, None) => p.clone().unwrap_or_default(),
            };
            match self.function.as_deref() {
                None => bad.push(FieldViolation::new("function", "required")),
                Some(name) => match builtin(name, &params) {
                    Ok(f) => oracle = Some(f),
                    Err(e @ Error::UnknownFunction(_)) => {
                        bad.push(FieldViolation::new("function", e.to_string()))
                    }
                    Err(e) => bad.push(FieldViolation::new("params", e.to_string())),
                },
            }
        }

        let x0 = self.x0.clone().unwrap_or_default();
        if needs_function {
            if self.x0.is_none() {
                bad.push(FieldViolation::new("x0", "required"));
            } else if x0.iter().any(|v| !v.is_finite()) {
                bad.push(FieldViolation::new("x0", "entries must be finite"));
            } else if let Some(f) = &oracle {
                if f.dim() != x0.len() {
                    bad.push(FieldViolation::new(
                        "x0",
                        format!("`{}` takes {} coordinates, got {}", f.name(), f.dim(), x0.len()),
                    ));
                }
            }
        }

        let step = self.step.unwrap_or(DEFAULT_NAIVE_STEP);
        if !(step > 0.0 && step.is_finite()) {
            bad.push(FieldViolation::new("step", "must be finite and > 0"));
        }
        if self.iters == Some(0) {
            bad.push(FieldViolation::new("iters", "must be >= 1"));
        }
        let directions = self.directions.unwrap_or(DEFAULT_DIRECTIONS);
        if directions == 0 {
            bad.push(FieldViolation::new("directions", "must be >= 1"));
        }

        let mut points = None;
        if matches!(mode, Mode::MinNorm | Mode::DualityCheck) {
            match &self.points {
                None => bad.push(FieldViolation::new("points", "required for this mode")),
                Some(p) => match read_points(p) {
                    Ok(h) => points = Some(h),
                    Err(e) => bad.push(FieldViolation::new("points", e.to_string())),
                },
            }
        }

        if !bad.is_empty() {
            return Err(bad);
        }
        Ok(Experiment {
            mode,
            oracle,
            x0,
            descent,
            step,
            iters: self.iters,
            points,
            directions,
            out: self.out.clone(),
            summary: self.summary.clone(),
        })
    }
}

fn read_points(path: &Path) -> crate::Result<HullSet> {
    HullSet::from_csv(&fs::read_to_string(path)?, Provenance::Exact)
}

/// The JSON summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub final_x: Vec<f64>,
    pub final_f: f64,
    pub iterations: usize,
    pub status: String,
    /// Sign changes of the first coordinate along the iterates.
    pub sign_alternations: usize,
}

impl Summary {
    pub fn of(traj: &Trajectory, oracle: &dyn FunctionOracle) -> Self {
        let final_x = traj.final_x();
        Self {
            final_f: oracle.value(&final_x),
            final_x,
            iterations: traj.iterations(),
            status: traj.status.as_str().to_string(),
            sign_alternations: traj.sign_alternations(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub iterations: usize,
    pub final_f: f64,
    pub final_x_norm: f64,
    pub sign_alternations: usize,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| method | iterations | final f | final ‖x‖₂ | sign alternations | status |\n\
             |---|---|---|---|---|---|\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.6e} | {:.6e} | {} | {} |",
                r.method, r.iterations, r.final_f, r.final_x_norm, r.sign_alternations, r.status
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,iterations,final_f,final_x_norm,sign_alternations,status\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{},{}",
                r.method, r.iterations, r.final_f, r.final_x_norm, r.sign_alternations, r.status
            );
        }
        s
    }
}

fn compare_row(method: &str, traj: &Trajectory, oracle: &dyn FunctionOracle) -> CompareRow {
    let s = Summary::of(traj, oracle);
    CompareRow {
        method: method.into(),
        iterations: s.iterations,
        final_f: s.final_f,
        final_x_norm: NormSpec::Euclidean.eval(&s.final_x),
        sign_alternations: s.sign_alternations,
        status: s.status,
    }
}

/// Set-gradient descent and the naive method from the same start. The naive
/// method gets `naive_iters` iterations, or as many as descent used.
pub fn compare(
    oracle: &dyn FunctionOracle,
    x0: &[f64],
    config: &DescentConfig,
    step: f64,
    naive_iters: Option<usize>,
) -> Result<(CompareReport, Trajectory, Trajectory), Box<PartialRun>> {
    let descent = run_descent(oracle, x0, config)?;
    let iters = naive_iters.unwrap_or_else(|| descent.iterations().max(1));
    let naive = naive_subgradient_run(oracle, x0, step, iters).map_err(|error| {
        Box::new(PartialRun { error, trajectory: descent.clone() })
    })?;
    let report = CompareReport {
        rows: vec![
            compare_row("set-gradient", &descent, oracle),
            compare_row("naive", &naive, oracle),
        ],
    };
    Ok((report, descent, naive))
}

/// Parse `std::env::args` and run.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let seed_env = std::env::var(SEED_ENV).ok();
    ExitCode::from(dispatch(cli.command, seed_env.as_deref()))
}

/// Run one command; returns the process exit code.
pub fn dispatch(command: Command, seed_env: Option<&str>) -> u8 {
    match command {
        Command::Run(a) => cmd_run(&a, seed_env, None),
        Command::Compare(a) => cmd_run(&a, seed_env, Some(Mode::Compare)),
        Command::MinNorm(a) => cmd_min_norm(&a),
        Command::DualityCheck(a) => cmd_duality(&a),
        Command::SampleGrad(a) => cmd_sample(&a, seed_env),
    }
}

fn invalid(violations: &[FieldViolation]) -> u8 {
    eprintln!("{}", json!({ "error": "invalid_config", "violations": violations }));
    EXIT_INVALID_CONFIG
}

fn solver_failure(message: &str) -> u8 {
    eprintln!("{}", json!({ "error": "solver_failure", "message": message }));
    EXIT_SOLVER_FAILURE
}

fn io_failure(path: &Path, e: &dyn std::fmt::Display) -> u8 {
    eprintln!("{}", json!({ "error": "io", "path": path.display().to_string(), "message": e.to_string() }));
    EXIT_SOLVER_FAILURE
}

fn load_experiment(a: &ExperimentArgs, seed_env: Option<&str>, force: Option<Mode>) -> Result<Experiment, Vec<FieldViolation>> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(a);
    cfg.apply_env(seed_env).map_err(|v| vec![v])?;
    if let Some(m) = force {
        cfg.mode = Some(match m {
            Mode::Compare => "compare".into(),
            _ => unreachable!("only compare is forced"),
        });
    }
    cfg.validate()
}

fn cmd_run(a: &ExperimentArgs, seed_env: Option<&str>, force: Option<Mode>) -> u8 {
    let exp = match load_experiment(a, seed_env, force) {
        Ok(e) => e,
        Err(v) => return invalid(&v),
    };
    match exp.mode {
        Mode::Descent | Mode::Naive => run_trajectory(&exp),
        Mode::Compare => run_compare(&exp, a.format.unwrap_or_default()),
        Mode::MinNorm => min_norm_output(exp.points.as_ref().expect("validated"), exp.descent.norm, DEFAULT_TOL),
        Mode::DualityCheck => duality_output(exp.points.as_ref().expect("validated"), exp.descent.norm, exp.directions),
    }
}

fn write_trace(path: Option<&Path>, traj: &Trajectory) -> Result<(), u8> {
    if let Some(p) = path {
        trace::write_csv(traj, p).map_err(|e| io_failure(p, &e))?;
    }
    Ok(())
}

fn run_trajectory(exp: &Experiment) -> u8 {
    let oracle = exp.oracle.as_ref().expect("validated");
    let result = match exp.mode {
        Mode::Descent => run_descent(oracle, &exp.x0, &exp.descent),
        _ => naive_subgradient_run(
            oracle,
            &exp.x0,
            exp.step,
            exp.iters.unwrap_or(DEFAULT_NAIVE_ITERS),
        )
        .map_err(|error| {
            Box::new(PartialRun {
                error,
                trajectory: Trajectory {
                    records: Vec::new(),
                    status: crate::descent::TerminationStatus::Failed,
                    wall_times: Default::default(),
                },
            })
        }),
    };
    match result {
        Ok(traj) => {
            if let Err(code) = write_trace(exp.out.as_deref(), &traj) {
                return code;
            }
            let summary = serde_json::to_string(&Summary::of(&traj, oracle)).expect("serializable");
            if let Some(p) = &exp.summary {
                if let Err(e) = fs::write(p, format!("{summary}\n")) {
                    return io_failure(p, &e);
                }
            }
            println!("{summary}");
            0
        }
        Err(partial) => {
            if !partial.trajectory.records.is_empty() {
                if let Err(code) = write_trace(exp.out.as_deref(), &partial.trajectory) {
                    return code;
                }
            }
            solver_failure(&partial.error.to_string())
        }
    }
}

fn run_compare(exp: &Experiment, format: ReportFormat) -> u8 {
    let oracle = exp.oracle.as_ref().expect("validated");
    match compare(oracle, &exp.x0, &exp.descent, exp.step, exp.iters) {
        Ok((report, descent, _)) => {
            if let Err(code) = write_trace(exp.out.as_deref(), &descent) {
                return code;
            }
            if let Some(p) = &exp.summary {
                let text = serde_json::to_string(&report).expect("serializable");
                if let Err(e) = fs::write(p, format!("{text}\n")) {
                    return io_failure(p, &e);
                }
            }
            match format {
                ReportFormat::Markdown => print!("{}", report.to_markdown()),
                ReportFormat::Csv => print!("{}", report.to_csv()),
            }
            0
        }
        Err(partial) => {
            if let Err(code) = write_trace(exp.out.as_deref(), &partial.trajectory) {
                return code;
            }
            solver_failure(&partial.error.to_string())
        }
    }
}

fn parse_norm(s: &str) -> Result<NormSpec, FieldViolation> {
    s.parse::<NormSpec>()
        .and_then(|n| n.validate().map(|_| n))
        .map_err(|e| FieldViolation::new("norm", e.to_string()))
}

fn load_points(a: &PointsArgs) -> Result<(HullSet, NormSpec), Vec<FieldViolation>> {
    let mut bad = Vec::new();
    let norm = parse_norm(&a.norm).map_err(|v| bad.push(v)).ok();
    let hull = read_points(&a.points)
        .map_err(|e| bad.push(FieldViolation::new("points", e.to_string())))
        .ok();
    if !(a.tol > 0.0) {
        bad.push(FieldViolation::new("tol", "must be > 0"));
    }
    if a.directions == 0 {
        bad.push(FieldViolation::new("directions", "must be >= 1"));
    }
    match (hull, norm) {
        (Some(h), Some(n)) if bad.is_empty() => Ok((h, n)),
        _ => Err(bad),
    }
}

fn cmd_min_norm(a: &PointsArgs) -> u8 {
    match load_points(a) {
        Ok((hull, norm)) => min_norm_output(&hull, norm, a.tol),
        Err(v) => invalid(&v),
    }
}

fn min_norm_output(hull: &HullSet, norm: NormSpec, tol: f64) -> u8 {
    match min_dual_norm_point(hull, norm, tol, DEFAULT_MAX_ITERS) {
        Ok(r) => {
            println!("{}", serde_json::to_string(&r).expect("serializable"));
            0
        }
        Err(Error::ConvergenceFailure { gap, best }) => {
            println!("{}", serde_json::to_string(&best).expect("serializable"));
            solver_failure(&format!("min-norm solver did not converge (gap {gap:e})"))
        }
        Err(e) => solver_failure(&e.to_string()),
    }
}

fn cmd_duality(a: &PointsArgs) -> u8 {
    match load_points(a) {
        Ok((hull, norm)) => duality_output(&hull, norm, a.directions),
        Err(v) => invalid(&v),
    }
}

fn duality_output(hull: &HullSet, norm: NormSpec, directions: usize) -> u8 {
    let dirs = match sphere_directions(hull.dim(), norm, directions) {
        Ok(d) => d,
        Err(e) => return invalid(&[FieldViolation::new("points", e.to_string())]),
    };
    let inf_support = dirs
        .iter()
        .map(|h| support_unchecked(hull, h))
        .fold(0.0, f64::min); // h = 0 is in the unit ball
    let (min_norm, code) = match min_dual_norm_point(hull, norm, DEFAULT_TOL, DEFAULT_MAX_ITERS) {
        Ok(r) => (r.norm_value, 0),
        Err(Error::ConvergenceFailure { best, .. }) => (best.norm_value, EXIT_SOLVER_FAILURE),
        Err(e) => return solver_failure(&e.to_string()),
    };
    println!(
        "{}",
        json!({
            "min_norm": min_norm,
            "inf_support": inf_support,
            "gap": (inf_support + min_norm).abs(),
            "directions": dirs.len(),
        })
    );
    code
}

fn cmd_sample(a: &SampleArgs, seed_env: Option<&str>) -> u8 {
    let mut bad = Vec::new();
    let params = match a.alpha {
        Some(al) if a.params.is_empty() => vec![al],
        Some(_) => {
            bad.push(FieldViolation::new("alpha", "give either alpha or params, not both"));
            a.params.clone()
        }
        None => a.params.clone(),
    };
    let oracle = builtin(&a.function, &params)
        .map_err(|e| {
            let field = if matches!(e, Error::UnknownFunction(_)) { "function" } else { "params" };
            bad.push(FieldViolation::new(field, e.to_string()));
        })
        .ok();
    let norm = parse_norm(&a.norm).map_err(|v| bad.push(v)).ok();
    let ball = norm.and_then(|n| {
        BallRegion::new(a.x0.clone(), a.eps0, n)
            .map_err(|e| bad.push(FieldViolation::new("eps0", e.to_string())))
            .ok()
    });
    if let (Some(f), Some(b)) = (&oracle, &ball) {
        if f.dim() != b.dim() {
            bad.push(FieldViolation::new(
                "x0",
                format!("`{}` takes {} coordinates, got {}", f.name(), f.dim(), b.dim()),
            ));
        }
    }
    if a.samples == 0 {
        bad.push(FieldViolation::new("samples", "must be >= 1"));
    }
    if a.workers == 0 {
        bad.push(FieldViolation::new("workers", "must be >= 1"));
    }
    let seed = match seed_env.map(|s| s.trim().parse::<u64>()) {
        None => a.seed,
        Some(Ok(s)) => s,
        Some(Err(_)) => {
            bad.push(FieldViolation::new(SEED_ENV, "not a u64"));
            a.seed
        }
    };
    let (Some(oracle), Some(ball)) = (oracle, ball) else {
        return invalid(&bad);
    };
    if !bad.is_empty() {
        return invalid(&bad);
    }

    let hull = if a.exact {
        HullSet::exact(&oracle, &Region::Ball(ball))
    } else {
        sample_ball_gradients_par(&oracle, &ball, a.samples, seed, a.workers)
    };
    match hull {
        Ok(h) => {
            let csv = h.to_csv();
            match &a.out {
                Some(p) => {
                    if let Err(e) = fs::write(p, csv) {
                        return io_failure(p, &e);
                    }
                }
                None => print!("{csv}"),
            }
            0
        }
        Err(e) => solver_failure(&e.to_string()),
    }
}
