//! Optimal descent directions on sets, and an ε-shrinking descent method
//! built on them.
//!
//! Each iteration represents `∂f(B̄ε(x))` by a [`HullSet`], takes its
//! minimal-norm element `ã`, and steps along `h̃ = -j(ã)` with a backtracking
//! line search. When `‖ã‖ ≤ σ` (approximate stationarity on the ball) or the
//! line search fails, `ε` shrinks; after an accepted step it resets to `ε0`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::hull::{sample_ball_gradients_par, support_unchecked, HullSet};
use crate::minnorm::{
    certificate_direction, max_min_direction, min_dual_norm_point, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use crate::norms::{dual_face, dual_map, NormSpec};
use crate::oracles::FunctionOracle;
use crate::region::{BallRegion, Region};
use crate::vector::{axpy, dot, max_abs, scale, sign};

/// Halvings before the line search gives up and returns `t = 0`.
pub const MAX_HALVINGS: usize = 40;

/// A direction together with its value of the support function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredDirection {
    pub h: Vec<f64>,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentCertificate {
    pub norm: NormSpec,
    pub a_min: Vec<f64>,
    pub a_min_norm: f64,
    /// Gap reported by the min-norm solver.
    pub min_norm_gap: f64,
    /// Unit steepest-descent direction; `None` when `‖ã‖ ≤ σ`.
    pub direction: Option<Vec<f64>>,
    /// `max_{a ∈ hull} ⟨a, h̃⟩`.
    pub directional_value: Option<f64>,
    /// `‖ã‖ / L` with `L = max_{a ∈ hull} ‖a‖_*`, the Lipschitz constant of
    /// the support function.
    pub stability_radius: Option<f64>,
    /// `|⟨ã, h̃⟩ + ‖ã‖|`.
    pub pairing_residual: Option<f64>,
    /// Scored face candidates (`l1`/`linf` only), best first.
    pub candidates: Vec<ScoredDirection>,
}

impl DescentCertificate {
    pub fn has_direction(&self) -> bool {
        self.direction.is_some()
    }
}

/// Steepest descent certificate for `conv(hull)` under `spec`.
pub fn descent_direction(hull: &HullSet, spec: NormSpec, sigma: f64) -> Result<DescentCertificate> {
    if !(sigma >= 0.0) {
        return Err(Error::Input(format!("sigma must be >= 0, got {sigma}")));
    }
    let mn = min_dual_norm_point(hull, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let mut cert = DescentCertificate {
        norm: spec,
        a_min: mn.point,
        a_min_norm: mn.norm_value,
        min_norm_gap: mn.tolerance_achieved,
        direction: None,
        directional_value: None,
        stability_radius: None,
        pairing_residual: None,
        candidates: Vec::new(),
    };
    if cert.a_min_norm <= sigma {
        return Ok(cert);
    }

    let h = if spec.strictly_convex() {
        // -j(ã), or -j of ã with round-off coordinates zeroed if that
        // descends faster: j is not Lipschitz at 0 for p > 2.
        let j = certificate_direction(hull.points(), &cert.a_min, &mn.coefficients, spec)
            .map_or_else(|| dual_map(&cert.a_min, spec), Ok)?;
        scale(&j, -1.0)
    } else {
        let mut candidates = face_candidates(hull, &cert.a_min, spec)?;
        // The face vertices need not contain a minimizer of the support
        // function when ã has near-ties; the LP direction always is one.
        let lp = scale(&max_min_direction(hull, spec)?, -1.0);
        let lp_support = support_unchecked(hull, &lp);
        let slack = 1e-12 * hull.max_dual_norm(spec).max(1.0);
        if lp_support < candidates[0].support - slack {
            candidates.insert(0, ScoredDirection { h: lp, support: lp_support });
        }
        let best = candidates[0].h.clone();
        cert.candidates = candidates;
        best
    };
    let lipschitz = hull.max_dual_norm(spec);
    cert.directional_value = Some(support_unchecked(hull, &h));
    cert.stability_radius = Some(cert.a_min_norm / lipschitz);
    cert.pairing_residual = Some((dot(&cert.a_min, &h) + cert.a_min_norm).abs());
    cert.direction = Some(h);
    Ok(cert)
}

/// The negated vertices of the dual face of `a` (for `l1`/`linf`), scored
/// by the support function of `hull` and sorted best first. Ties keep the
/// face's enumeration order.
///
/// Any of these satisfies `⟨a, h⟩ = -‖a‖_*`, yet some can be ascent
/// directions; scoring is what makes the choice.
pub fn face_candidates(hull: &HullSet, a: &[f64], spec: NormSpec) -> Result<Vec<ScoredDirection>> {
    check_dim(hull.dim(), a.len())?;
    let mut out: Vec<ScoredDirection> = dual_face(&snap_ties(a, spec), spec)?
        .into_iter()
        .map(|v| {
            let h = scale(&v, -1.0);
            let support = support_unchecked(hull, &h);
            ScoredDirection { h, support }
        })
        .collect();
    out.sort_by(|x, y| x.support.total_cmp(&y.support));
    Ok(out)
}

/// Make near-ties exact so the face of a numerically computed `ã` is the
/// face of the exact one: for `l1`, entries within a relative 1e-9 of the
/// max-magnitude become maximal; for `linf`, entries that small become zero.
fn snap_ties(a: &[f64], spec: NormSpec) -> Vec<f64> {
    let m = max_abs(a);
    let tol = 1e-9 * m;
    match spec {
        NormSpec::L1 => a
            .iter()
            .map(|&v| if m - v.abs() <= tol { sign(v) * m } else { v })
            .collect(),
        NormSpec::Linf => a.iter().map(|&v| if v.abs() <= tol { 0.0 } else { v }).collect(),
        _ => a.to_vec(),
    }
}

/// Whether `h` lies strictly inside the stability ball `‖h - h̃‖ < ‖ã‖/L`.
pub fn stability_check(h: &[f64], cert: &DescentCertificate, lipschitz: f64) -> bool {
    let Some(ht) = &cert.direction else {
        return false;
    };
    if h.len() != ht.len() || !(lipschitz > 0.0) {
        return false;
    }
    let d: Vec<f64> = h.iter().zip(ht).map(|(x, y)| x - y).collect();
    cert.norm.eval(&d) < cert.a_min_norm / lipschitz
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub tau: f64,
    pub delta: f64,
    /// Accepted perturbations `a′`.
    pub trials: usize,
    pub attempts: usize,
    pub min_support: Option<f64>,
    pub max_support: Option<f64>,
    /// Trials with `support(h′) ≥ -δ‖ã‖`.
    pub violations: usize,
    pub violation_fraction: f64,
}

/// How well `h′ = -j(a′)` does for near-minimal `a′` in the hull.
///
/// Draws `a′ = ã + s (a_k - ã)` with `a_k` a random hull point and `s`
/// log-uniform in `[1e-12, 1]`, keeping those with `‖a′‖ ≤ ‖ã‖ + τ`, and
/// counts how often `support(h′) < -δ‖ã‖` fails.
pub fn approx_direction_quality(
    hull: &HullSet,
    spec: NormSpec,
    tau: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ApproxReport> {
    if !spec.strictly_convex() {
        return Err(Error::NonUniqueDualMap(spec.to_string()));
    }
    if !(tau > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Input(format!(
            "need tau > 0 and 0 < delta < 1, got tau={tau}, delta={delta}"
        )));
    }
    let mn = min_dual_norm_point(hull, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS)?;
    let (a, na) = (&mn.point, mn.norm_value);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ApproxReport {
        tau,
        delta,
        trials: 0,
        attempts: 0,
        min_support: None,
        max_support: None,
        violations: 0,
        violation_fraction: 0.0,
    };
    let pts = hull.points();
    while report.trials < trials && report.attempts < 100 * trials {
        report.attempts += 1;
        let k = rng.random_range(0..pts.len());
        let s = 10f64.powf(rng.random_range(-12.0..=0.0));
        let ap: Vec<f64> = a.iter().zip(&pts[k]).map(|(x, y)| x + s * (y - x)).collect();
        if spec.eval_dual(&ap) > na + tau {
            continue;
        }
        let Ok(j) = dual_map(&ap, spec) else {
            continue;
        };
        let v = support_unchecked(hull, &scale(&j, -1.0));
        report.trials += 1;
        report.min_support = Some(report.min_support.map_or(v, |m| m.min(v)));
        report.max_support = Some(report.max_support.map_or(v, |m| m.max(v)));
        if v >= -delta * na {
            report.violations += 1;
        }
    }
    if report.trials > 0 {
        report.violation_fraction = report.violations as f64 / report.trials as f64;
    }
    Ok(report)
}

/// Largest `τ` in `taus` whose report has trials and no violations.
pub fn largest_violation_free_tau(
    hull: &HullSet,
    spec: NormSpec,
    delta: f64,
    taus: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let mut best = None;
    for &tau in taus {
        let r = approx_direction_quality(hull, spec, tau, delta, trials, seed)?;
        if r.trials > 0 && r.violations == 0 && best.is_none_or(|b| tau > b) {
            best = Some(tau);
        }
    }
    Ok(best)
}

/// Backtracking from `t = ε` by halves until
/// `f(x + t h) ≤ f(x) + c t fAh`; `0` if [`MAX_HALVINGS`] halvings fail.
pub fn line_search(
    oracle: &dyn FunctionOracle,
    x: &[f64],
    h: &[f64],
    fah: f64,
    eps: f64,
    armijo: f64,
) -> f64 {
    let fx = oracle.value(x);
    let mut t = eps;
    for _ in 0..=MAX_HALVINGS {
        if oracle.value(&axpy(x, t, h)) <= fx + armijo * t * fah {
            return t;
        }
        t *= 0.5;
    }
    0.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HullMode {
    /// Exact when the oracle supports it, sampled otherwise.
    #[default]
    Auto,
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    pub eps0: f64,
    /// Shrink factor for ε.
    pub theta: f64,
    /// Stationarity threshold; `None` means `1e-6 · L` for the local
    /// Lipschitz bound `L` on the current ball.
    pub sigma: Option<f64>,
    pub eps_min: f64,
    pub samples: usize,
    pub armijo: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub norm: NormSpec,
    pub hull: HullMode,
    /// Sampling threads; results do not depend on it.
    pub workers: usize,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            eps0: 0.5,
            theta: 0.5,
            sigma: None,
            eps_min: 1e-3,
            samples: 200,
            armijo: 0.5,
            max_iter: 1000,
            seed: 0,
            norm: NormSpec::Euclidean,
            hull: HullMode::Auto,
            workers: 1,
        }
    }
}

/// One violated configuration constraint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub field: String,
    pub reason: String,
}

impl FieldViolation {
    pub fn new(field: &str, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

impl DescentConfig {
    /// Every violated field, in declaration order.
    pub fn violations(&self) -> Vec<FieldViolation> {
        let mut v = Vec::new();
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            v.push(FieldViolation::new("eps0", "must be finite and > 0"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            v.push(FieldViolation::new("theta", "must be in (0, 1)"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                v.push(FieldViolation::new("sigma", "must be finite and > 0"));
            }
        }
        if !(self.eps_min > 0.0 && self.eps_min.is_finite()) {
            v.push(FieldViolation::new("eps_min", "must be finite and > 0"));
        }
        if self.samples == 0 {
            v.push(FieldViolation::new("samples", "must be >= 1"));
        }
        if !(self.armijo > 0.0 && self.armijo <= 1.0) {
            v.push(FieldViolation::new("armijo", "must be in (0, 1]"));
        }
        if self.max_iter == 0 {
            v.push(FieldViolation::new("max_iter", "must be >= 1"));
        }
        if let Err(e) = self.norm.validate() {
            v.push(FieldViolation::new("norm", e.to_string()));
        }
        if self.workers == 0 {
            v.push(FieldViolation::new("workers", "must be >= 1"));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            return Ok(());
        }
        let list: Vec<String> = v.iter().map(|f| format!("{}: {}", f.field, f.reason)).collect();
        Err(Error::Input(list.join("; ")))
    }
}

/// What an iteration did.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Step,
    Shrink,
    Stationary,
    IterLimit,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Step => "step",
            StepStatus::Shrink => "shrink",
            StepStatus::Stationary => "stationary",
            StepStatus::IterLimit => "iter_limit",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "step" => StepStatus::Step,
            "shrink" => StepStatus::Shrink,
            "stationary" => StepStatus::Stationary,
            "iter_limit" => StepStatus::IterLimit,
            other => return Err(Error::Parse(format!("unknown status `{other}`"))),
        })
    }
}

/// State at the start of an iteration and the action taken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub x: Vec<f64>,
    pub f: f64,
    pub eps: f64,
    /// `None` when no hull was solved (or the solve failed outright).
    pub a_min_norm: Option<f64>,
    pub direction: Option<Vec<f64>>,
    pub step: f64,
    /// Gradient evaluations spent on the hull (0 for exact hulls).
    pub samples: usize,
    pub status: StepStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationStatus {
    ApproximatelyStationary,
    IterationLimit,
    /// Stopped by an error; the trajectory is partial.
    Failed,
}

impl TerminationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationStatus::ApproximatelyStationary => "stationary",
            TerminationStatus::IterationLimit => "iter_limit",
            TerminationStatus::Failed => "failed",
        }
    }
}

/// Per-record wall-clock seconds. Timings are measurements rather than
/// state, so they never make two trajectories unequal and are not part of
/// the trace CSV.
#[derive(Clone, Debug, Default)]
pub struct WallTimes(pub Vec<f64>);

impl PartialEq for WallTimes {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TraceRecord>,
    pub status: TerminationStatus,
    pub wall_times: WallTimes,
}

impl Trajectory {
    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.x.len())
    }

    /// Iterations recorded, excluding a closing `iter_limit` marker.
    pub fn iterations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.status != StepStatus::IterLimit)
            .count()
    }

    /// The last iterate: the last record's `x`, advanced by its step if
    /// that step was accepted.
    pub fn final_x(&self) -> Vec<f64> {
        match self.records.last() {
            Some(r) => match (&r.direction, r.status) {
                (Some(h), StepStatus::Step) => axpy(&r.x, r.step, h),
                _ => r.x.clone(),
            },
            None => Vec::new(),
        }
    }

    /// Iterates in order, ending with [`Trajectory::final_x`].
    pub fn iterates(&self) -> Vec<Vec<f64>> {
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(self.records.len() + 1);
        for r in &self.records {
            if xs.last() != Some(&r.x) {
                xs.push(r.x.clone());
            }
        }
        let last = self.final_x();
        if xs.last() != Some(&last) {
            xs.push(last);
        }
        xs
    }

    /// Sign changes of coordinate `coord` along the iterates; zeros are
    /// skipped.
    pub fn sign_alternations(&self, coord: usize) -> usize {
        let mut last = 0.0;
        let mut count = 0;
        for x in self.iterates() {
            let s = x.get(coord).map_or(0.0, |v| sign(*v));
            if s != 0.0 {
                if last != 0.0 && s != last {
                    count += 1;
                }
                last = s;
            }
        }
        count
    }

    /// `f` at each distinct recorded iterate, in order.
    pub fn iterate_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut prev: Option<&Vec<f64>> = None;
        for r in &self.records {
            if prev != Some(&r.x) {
                out.push(r.f);
                prev = Some(&r.x);
            }
        }
        out
    }
}

/// A run stopped by an error, with everything recorded up to that point.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct PartialRun {
    #[source]
    pub error: Error,
    pub trajectory: Trajectory,
}

/// Seed for the hull sample of iteration `iter` (SplitMix64 of the pair),
/// so sampled runs are reproducible from `seed` alone.
pub fn iteration_seed(seed: u64, iter: usize) -> u64 {
    let mut z = seed.wrapping_add((iter as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// ε-shrinking steepest descent with set-gradient certificates.
pub fn run_descent(
    oracle: &dyn FunctionOracle,
    x0: &[f64],
    config: &DescentConfig,
) -> std::result::Result<Trajectory, Box<PartialRun>> {
    let mut traj = Trajectory {
        records: Vec::new(),
        status: TerminationStatus::Failed,
        wall_times: WallTimes::default(),
    };
    let fail = |error: Error, mut trajectory: Trajectory| {
        trajectory.status = TerminationStatus::Failed;
        Box::new(PartialRun { error, trajectory })
    };
    let setup = config
        .validate()
        .and_then(|_| check_dim(oracle.dim(), x0.len()))
        .and_then(|_| check_finite(x0));
    if let Err(e) = setup {
        return Err(fail(e, traj));
    }
    let exact = match config.hull {
        HullMode::Auto => oracle.has_exact_subdiff(),
        HullMode::Exact => true,
        HullMode::Sampled => false,
    };
    let norm = config.norm;
    let mut x = x0.to_vec();
    let mut eps = config.eps0;

    for iter in 0..config.max_iter {
        let started = Instant::now();
        let f = oracle.value(&x);
        if !f.is_finite() {
            return Err(fail(Error::Input(format!("f is not finite at {x:?}")), traj));
        }
        let ball = match BallRegion::new(x.clone(), eps, norm) {
            Ok(b) => b,
            Err(e) => return Err(fail(e, traj)),
        };
        let (hull, samples) = if exact {
            (HullSet::exact(oracle, &Region::Ball(ball.clone())), 0)
        } else {
            let seed = iteration_seed(config.seed, iter);
            let h = sample_ball_gradients_par(oracle, &ball, config.samples, seed, config.workers);
            (h, config.samples + 1)
        };
        let hull = match hull {
            Ok(h) => h,
            Err(e) => return Err(fail(e, traj)),
        };
        let sigma = config
            .sigma
            .unwrap_or_else(|| 1e-6 * oracle.lipschitz_bound(&x, eps, norm));

        let mut rec = TraceRecord {
            iter,
            x: x.clone(),
            f,
            eps,
            a_min_norm: None,
            direction: None,
            step: 0.0,
            samples,
            status: StepStatus::Shrink,
        };
        match descent_direction(&hull, norm, sigma) {
            Ok(cert) => {
                rec.a_min_norm = Some(cert.a_min_norm);
                match (&cert.direction, cert.directional_value) {
                    (None, _) if eps <= config.eps_min => rec.status = StepStatus::Stationary,
                    (Some(h), Some(fah)) if fah < 0.0 => {
                        let t = line_search(oracle, &x, h, fah, eps, config.armijo);
                        rec.direction = Some(h.clone());
                        if t > 0.0 {
                            rec.step = t;
                            rec.status = StepStatus::Step;
                        }
                    }
                    (h, _) => rec.direction = h.clone(),
                }
            }
            // An unconverged min-norm solve cannot certify anything about
            // this ball; treat it like a failed line search.
            Err(Error::ConvergenceFailure { best, .. }) => rec.a_min_norm = Some(best.norm_value),
            Err(e) => return Err(fail(e, traj)),
        }

        match rec.status {
            StepStatus::Step => {
                x = axpy(&x, rec.step, rec.direction.as_deref().expect("step has a direction"));
                eps = config.eps0;
            }
            StepStatus::Shrink => eps *= config.theta,
            _ => {}
        }
        let done = rec.status == StepStatus::Stationary;
        traj.records.push(rec);
        traj.wall_times.0.push(started.elapsed().as_secs_f64());
        if done {
            traj.status = TerminationStatus::ApproximatelyStationary;
            return Ok(traj);
        }
    }

    traj.records.push(TraceRecord {
        iter: config.max_iter,
        f: oracle.value(&x),
        x,
        eps,
        a_min_norm: None,
        direction: None,
        step: 0.0,
        samples: 0,
        status: StepStatus::IterLimit,
    });
    traj.wall_times.0.push(0.0);
    traj.status = TerminationStatus::IterationLimit;
    Ok(traj)
}

/// Normalized-gradient baseline: `x ← x - step · g/‖g‖₂` with `g` the
/// oracle's almost-everywhere gradient. Stops early only at `g = 0`.
pub fn naive_subgradient_run(
    oracle: &dyn FunctionOracle,
    x0: &[f64],
    step: f64,
    iterations: usize,
) -> Result<Trajectory> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Input(format!("step must be finite and > 0, got {step}")));
    }
    check_dim(oracle.dim(), x0.len())?;
    check_finite(x0)?;
    let mut traj = Trajectory {
        records: Vec::with_capacity(iterations + 1),
        status: TerminationStatus::IterationLimit,
        wall_times: WallTimes::default(),
    };
    let mut x = x0.to_vec();
    for iter in 0..iterations {
        let started = Instant::now();
        let g = oracle.gradient(&x);
        let gn = NormSpec::Euclidean.eval(&g);
        let mut rec = TraceRecord {
            iter,
            x: x.clone(),
            f: oracle.value(&x),
            eps: step,
            a_min_norm: Some(gn),
            direction: None,
            step: 0.0,
            samples: 1,
            status: StepStatus::Stationary,
        };
        if gn > 0.0 {
            let h = scale(&g, -1.0 / gn);
            x = axpy(&x, step, &h);
            rec.direction = Some(h);
            rec.step = step;
            rec.status = StepStatus::Step;
        }
        let done = rec.status == StepStatus::Stationary;
        traj.records.push(rec);
        traj.wall_times.0.push(started.elapsed().as_secs_f64());
        if done {
            traj.status = TerminationStatus::ApproximatelyStationary;
            return Ok(traj);
        }
    }
    traj.records.push(TraceRecord {
        iter: iterations,
        f: oracle.value(&x),
        x,
        eps: step,
        a_min_norm: None,
        direction: None,
        step: 0.0,
        samples: 0,
        status: StepStatus::IterLimit,
    });
    traj.wall_times.0.push(0.0);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::{support_value, Provenance};
    use crate::oracles::{MaxAffineSpec, PieceSpec, PiecewiseAffine};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hull(points: &[&[f64]]) -> HullSet {
        HullSet::new(points.iter().map(|p| p.to_vec()).collect(), Provenance::Exact).unwrap()
    }

    fn valley_hull() -> HullSet {
        hull(&[&[1.0, 0.01], &[-1.0, 0.01]])
    }

    #[test]
    fn valley_direction() {
        let c = descent_direction(&valley_hull(), NormSpec::Euclidean, 1e-6).unwrap();
        assert!(c.a_min[0].abs() <= 1e-12 && (c.a_min[1] - 0.01).abs() <= 1e-12);
        let h = c.direction.as_ref().unwrap();
        assert!(h[0].abs() <= 1e-9 && (h[1] + 1.0).abs() <= 1e-9);
        assert_abs_diff_eq!(c.directional_value.unwrap(), -0.01, epsilon = 1e-9);
        assert!(c.pairing_residual.unwrap() <= 1e-8);
    }

    #[test]
    fn l1_selection_rejects_ascent_vertex() {
        let h = hull(&[&[1.0, -1.0], &[1.0, 1.0]]);
        let c = descent_direction(&h, NormSpec::L1, 1e-6).unwrap();
        assert_eq!(c.direction.as_deref(), Some(&[-1.0, 0.0][..]));
        assert_eq!(c.directional_value, Some(-1.0));
        // The face of ã = (1, 1) also offers (0, -1), an ascent direction.
        let cands = face_candidates(&h, &[1.0, 1.0], NormSpec::L1).unwrap();
        assert_eq!(cands[0], ScoredDirection { h: vec![-1.0, 0.0], support: -1.0 });
        assert!(cands.contains(&ScoredDirection { h: vec![0.0, -1.0], support: 1.0 }));
    }

    #[test]
    fn linf_selection_rejects_ascent_vertex() {
        let h = hull(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let c = descent_direction(&h, NormSpec::Linf, 1e-6).unwrap();
        assert_eq!(c.direction.as_deref(), Some(&[-1.0, -1.0][..]));
        assert_eq!(c.directional_value, Some(-1.0));
        let cands = face_candidates(&h, &[1.0, 0.0], NormSpec::Linf).unwrap();
        assert_eq!(cands[0], ScoredDirection { h: vec![-1.0, -1.0], support: -1.0 });
        assert!(cands.contains(&ScoredDirection { h: vec![-1.0, 1.0], support: 1.0 }));
    }

    #[test]
    fn zero_in_hull_gives_no_direction() {
        let h = hull(&[&[1.0, 0.0], &[-1.0, 0.5], &[0.0, -1.0]]);
        for spec in [NormSpec::Euclidean, NormSpec::P(3.0), NormSpec::L1, NormSpec::Linf] {
            let c = descent_direction(&h, spec, 1e-6).unwrap();
            assert!(!c.has_direction() && c.a_min_norm <= 1e-6, "{spec}");
        }
    }

    #[test]
    fn stability_examples() {
        let hv = valley_hull();
        let c = descent_direction(&hv, NormSpec::Euclidean, 1e-6).unwrap();
        let ht = c.direction.clone().unwrap();
        assert!(stability_check(&ht, &c, 1.0));
        let raw = [0.005, -1.0];
        let n = NormSpec::Euclidean.eval(&raw);
        let h: Vec<f64> = raw.iter().map(|v| v / n).collect();
        assert!(stability_check(&h, &c, 1.0));
        assert!(support_value(&hv, &h).unwrap() < 0.0);
        assert!(!stability_check(&scale(&ht, -1.0), &c, 1.0));
    }

    #[test]
    fn approx_quality_small_tau_is_clean() {
        let r = approx_direction_quality(&valley_hull(), NormSpec::Euclidean, 1e-12, 0.9, 1000, 3)
            .unwrap();
        assert!(r.trials > 0);
        assert_eq!(r.violations, 0);
        assert!(r.max_support.unwrap() < -0.9 * 0.01);
    }

    #[test]
    fn approx_quality_tau_sweep() {
        // With a′ = (s, 0.01): ‖a′‖ - ‖ã‖ ≈ s²/0.02 and the support of -j(a′)
        // is (s - 1e-4)/‖a′‖, which stays below -0.009 only while
        // s ≲ 1e-5, i.e. τ ≲ 5e-9. Larger τ admits violations.
        let hv = valley_hull();
        let taus: Vec<f64> = (0..=12).map(|k| 10f64.powi(-k)).collect();
        let best = largest_violation_free_tau(&hv, NormSpec::Euclidean, 0.9, &taus, 1000, 5)
            .unwrap()
            .unwrap();
        assert_eq!(best, 1e-9);
        let r = approx_direction_quality(&hv, NormSpec::Euclidean, 1e-4, 0.9, 1000, 5).unwrap();
        assert!(r.violations > 0);
        let r = approx_direction_quality(&hv, NormSpec::Euclidean, 10.0, 0.99, 1000, 5).unwrap();
        assert!(r.violation_fraction > 0.0);
    }

    #[test]
    fn approx_quality_errors() {
        let hv = valley_hull();
        assert!(approx_direction_quality(&hv, NormSpec::L1, 1e-3, 0.9, 10, 0).is_err());
        assert!(approx_direction_quality(&hv, NormSpec::Euclidean, 0.0, 0.9, 10, 0).is_err());
        assert!(approx_direction_quality(&hv, NormSpec::Euclidean, 1e-3, 1.0, 10, 0).is_err());
    }

    #[test]
    fn valley_line_search_takes_full_step() {
        let f = PiecewiseAffine::valley(0.01);
        let t = line_search(&f, &[0.0, 5.0], &[0.0, -1.0], -0.01, 0.5, 0.5);
        assert_eq!(t, 0.5);
    }

    #[test]
    fn line_search_sentinel() {
        // Claimed slope far better than the truth: no step is accepted.
        let f = PiecewiseAffine::valley(0.01);
        assert_eq!(line_search(&f, &[0.0, 5.0], &[0.0, -1.0], -1.0, 0.5, 0.5), 0.0);
    }

    fn exact_config() -> DescentConfig {
        DescentConfig { hull: HullMode::Exact, ..DescentConfig::default() }
    }

    #[test]
    fn valley_run_reaches_origin() {
        let f = PiecewiseAffine::valley(0.01);
        let traj = run_descent(&f, &[0.02, 5.0], &exact_config()).unwrap();
        assert_eq!(traj.status, TerminationStatus::ApproximatelyStationary);
        let x = traj.final_x();
        assert!(NormSpec::Euclidean.eval(&x) <= 2e-3, "{x:?}");
        assert!(traj.iterate_values().windows(2).all(|w| w[1] < w[0]));
        // Nine full steps straight down the valley; the tenth ball touches
        // the kink line x₂ = 0 and forces a shrink.
        for r in &traj.records[..9] {
            assert_eq!(r.status, StepStatus::Step);
            assert_eq!(r.direction.as_deref(), Some(&[0.0, -1.0][..]));
        }
    }

    #[test]
    fn linear_run_steps_by_eps() {
        let c = vec![3.0, -4.0];
        let f = PiecewiseAffine::linear(c.clone());
        let cfg = DescentConfig { max_iter: 5, ..exact_config() };
        let traj = run_descent(&f, &[1.0, 1.0], &cfg).unwrap();
        assert_eq!(traj.status, TerminationStatus::IterationLimit);
        for r in traj.records.iter().take(5) {
            assert_eq!(r.status, StepStatus::Step);
            assert_eq!(r.step, 0.5);
            assert_abs_diff_eq!(r.a_min_norm.unwrap(), 5.0, epsilon = 1e-12);
            let h = r.direction.as_ref().unwrap();
            assert_abs_diff_eq!(h[0], -0.6, epsilon = 1e-12);
            assert_abs_diff_eq!(h[1], 0.8, epsilon = 1e-12);
        }
        for w in traj.iterate_values().windows(2) {
            assert_abs_diff_eq!(w[0] - w[1], 0.5 * 5.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn stationary_start_only_shrinks() {
        let f = PiecewiseAffine::weighted_abs(vec![1.0, 2.0]);
        let cfg = DescentConfig { eps0: 0.01, ..exact_config() };
        let traj = run_descent(&f, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(traj.status, TerminationStatus::ApproximatelyStationary);
        assert!(traj.records.iter().all(|r| r.x == [0.0, 0.0] && r.step == 0.0));
        let (last, rest) = traj.records.split_last().unwrap();
        assert_eq!(last.status, StepStatus::Stationary);
        assert!(rest.iter().all(|r| r.status == StepStatus::Shrink));
        // 0.01 · 2⁻⁴ is the first radius at or below 1e-3.
        assert_eq!(traj.records.len(), 5);
    }

    #[test]
    fn sampled_runs_are_deterministic() {
        let f = PiecewiseAffine::valley(0.01);
        let cfg = DescentConfig {
            hull: HullMode::Sampled,
            samples: 64,
            seed: 9,
            max_iter: 60,
            ..DescentConfig::default()
        };
        let a = run_descent(&f, &[0.02, 5.0], &cfg).unwrap();
        let b = run_descent(&f, &[0.02, 5.0], &DescentConfig { workers: 3, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert!(a.iterate_values().windows(2).all(|w| w[1] < w[0]));
        assert!(a.final_x()[1] < 1.0);
    }

    #[test]
    fn naive_valley_oscillates() {
        let f = PiecewiseAffine::valley(0.01);
        let traj = naive_subgradient_run(&f, &[0.02, 5.0], 0.05, 50).unwrap();
        assert!(traj.sign_alternations(0) >= 10);
        assert_eq!(traj.iterations(), 50);
    }

    #[test]
    fn naive_linear_goes_straight() {
        let f = PiecewiseAffine::linear(vec![1.0, 1.0]);
        let traj = naive_subgradient_run(&f, &[0.3, 0.2], 0.1, 20).unwrap();
        assert_eq!(traj.sign_alternations(0) + traj.sign_alternations(1), 2);
        let h = traj.records[0].direction.clone().unwrap();
        assert!(traj.records[..20].iter().all(|r| r.direction.as_ref() == Some(&h)));
    }

    #[test]
    fn naive_on_axis_takes_positive_branch() {
        let f = PiecewiseAffine::valley(0.01);
        let traj = naive_subgradient_run(&f, &[0.0, 5.0], 0.05, 3).unwrap();
        // The kink gradient is (1, α), so the first step moves left.
        assert!(traj.records[1].x[0] < 0.0);
        assert_eq!(traj, naive_subgradient_run(&f, &[0.0, 5.0], 0.05, 3).unwrap());
    }

    #[test]
    fn config_violations_list_every_field() {
        let cfg = DescentConfig {
            eps0: -1.0,
            theta: 1.0,
            sigma: Some(0.0),
            eps_min: 0.0,
            samples: 0,
            armijo: 0.0,
            max_iter: 0,
            norm: NormSpec::P(0.5),
            workers: 0,
            ..DescentConfig::default()
        };
        let fields: Vec<String> = cfg.violations().into_iter().map(|v| v.field).collect();
        assert_eq!(
            fields,
            ["eps0", "theta", "sigma", "eps_min", "samples", "armijo", "max_iter", "norm", "workers"]
        );
        assert!(DescentConfig::default().validate().is_ok());
        let f = PiecewiseAffine::valley(0.01);
        let err = run_descent(&f, &[0.0, 1.0], &cfg).unwrap_err();
        assert!(err.trajectory.records.is_empty());
        assert_eq!(err.trajectory.status, TerminationStatus::Failed);
    }

    #[test]
    fn iteration_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|i| iteration_seed(7, i)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), s.len());
    }

    fn arb_max_affine() -> impl Strategy<Value = PiecewiseAffine> {
        prop::collection::vec((prop::collection::vec(-3i32..=3, 2), -2i32..=2), 1..5).prop_map(|ps| {
            let spec = MaxAffineSpec {
                dim: 2,
                pieces: ps
                    .into_iter()
                    .map(|(c, b)| PieceSpec {
                        c: c.into_iter().map(f64::from).collect(),
                        b: f64::from(b) * 0.5,
                    })
                    .collect(),
            };
            PiecewiseAffine::max_affine(&spec).unwrap()
        })
    }

    #[test]
    fn p_norm_direction_at_zero_coordinate_is_exact() {
        let h = HullSet::new(vec![vec![1.0, -2.0], vec![-1.0, -2.0]], Provenance::Exact).unwrap();
        for p in [1.5, 3.0, 4.0] {
            let c = descent_direction(&h, NormSpec::P(p), 1e-9).unwrap();
            let d = c.direction.unwrap();
            assert!(crate::vector::max_abs_diff(&d, &[0.0, 1.0]) <= 1e-15, "p={p}: {d:?}");
            assert!((c.directional_value.unwrap() + 2.0).abs() <= 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_certificates_satisfy_the_pairing_identity(
            f in arb_max_affine(),
            x in prop::collection::vec(-2.0..2.0f64, 2),
            eps in 0.05..1.0f64,
            p in prop::sample::select(vec![2.0, 3.0, 1.5]),
        ) {
            let spec = if p == 2.0 { NormSpec::Euclidean } else { NormSpec::P(p) };
            let region = Region::ball(x, eps, spec).unwrap();
            let h = HullSet::exact(&f, &region).unwrap();
            let c = descent_direction(&h, spec, 1e-9).unwrap();
            if let Some(d) = &c.direction {
                prop_assert!((spec.eval(d) - 1.0).abs() <= 1e-10);
                prop_assert!(c.pairing_residual.unwrap() <= 1e-8);
                let scale = h.max_dual_norm(spec).max(1.0);
                prop_assert!((c.directional_value.unwrap() + c.a_min_norm).abs() <= 1e-8 * scale);
            }
        }

        #[test]
        fn exact_line_search_respects_descent_estimate(
            f in arb_max_affine(),
            x in prop::collection::vec(-2.0..2.0f64, 2),
            eps in 0.05..1.0f64,
        ) {
            let region = Region::ball(x.clone(), eps, NormSpec::Euclidean).unwrap();
            let h = HullSet::exact(&f, &region).unwrap();
            let c = descent_direction(&h, NormSpec::Euclidean, 1e-9).unwrap();
            if let (Some(d), Some(fah)) = (&c.direction, c.directional_value) {
                let t = line_search(&f, &x, d, fah, eps, 1.0);
                if t > 0.0 {
                    let lhs = f.value(&axpy(&x, t, d));
                    prop_assert!(lhs <= f.value(&x) + t * fah + 1e-12);
                }
            }
        }

        #[test]
        fn valley_regularity_persists_off_axis(
            x1 in -0.2..0.2f64,
            eps in 0.01..0.5f64,
            x2_extra in 0.0..5.0f64,
        ) {
            let alpha = 0.01;
            let f = PiecewiseAffine::valley(alpha);
            let x = [x1, 2.0 * eps + x2_extra];
            let h = HullSet::exact(&f, &Region::ball(x.to_vec(), eps, NormSpec::Euclidean).unwrap()).unwrap();
            let c = descent_direction(&h, NormSpec::Euclidean, 0.0).unwrap();
            prop_assert!(c.a_min_norm >= alpha - 1e-12);
        }
    }
}
