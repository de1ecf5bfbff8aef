//! Minimal-norm element of the convex hull of finitely many dual vectors.
//!
//! Three solvers share one result type:
//! - Euclidean: Wolfe's corral method with exact affine minimizers.
//! - Smooth p-norms: the same corral scheme, with the affine minimizer of
//!   `½‖Σμᵢaᵢ‖²` found by damped Newton.
//! - `l1`/`linf` dual norms: a primal LP for the minimizer and the dual LP
//!   `max_{‖h‖≤1} minᵢ ⟨aᵢ, h⟩` for the certificate.
//!
//! For each, `tolerance_achieved` is a certified gap: the norm of the returned
//! point minus `minᵢ ⟨aᵢ, h⟩` for a unit `h`, which lower-bounds the optimum.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hull::{support_unchecked, HullSet};
use crate::norms::{dual_map, NormSpec};
use crate::vector::{dot, max_abs, sign};

pub const DEFAULT_EUCLIDEAN_TOL: f64 = 1e-10;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinNormResult {
    pub point: Vec<f64>,
    /// Simplex weights over the hull points, `point = Σ λᵢ aᵢ`.
    pub coefficients: Vec<f64>,
    pub norm_value: f64,
    pub tolerance_achieved: f64,
}

impl MinNormResult {
    fn from_coefficients(hull: &HullSet, mut coefficients: Vec<f64>, norm: NormSpec, gap: f64) -> Self {
        for c in &mut coefficients {
            if *c < 0.0 {
                *c = 0.0;
            }
        }
        let s: f64 = coefficients.iter().sum();
        for c in &mut coefficients {
            *c /= s;
        }
        let point = combine(hull.points(), &coefficients);
        let norm_value = norm.eval_dual(&point);
        Self { point, coefficients, norm_value, tolerance_achieved: gap }
    }
}

fn combine(points: &[Vec<f64>], coefficients: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (p, &c) in points.iter().zip(coefficients) {
        if c != 0.0 {
            for (xi, pi) in x.iter_mut().zip(p) {
                *xi += c * pi;
            }
        }
    }
    x
}

/// Euclidean minimal-norm point of `conv(hull)` by Wolfe's method.
///
/// Stops once `⟨ã, aᵢ - ã⟩ ≥ -tol·max‖aᵢ‖²` for every hull point.
pub fn min_norm_point_euclidean(hull: &HullSet, tol: f64) -> Result<MinNormResult> {
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let pts = hull.points();
    let scale2 = pts.iter().map(|p| dot(p, p)).fold(0.0, f64::max);
    if scale2 == 0.0 {
        return Ok(MinNormResult::from_coefficients(hull, unit(pts.len(), 0), NormSpec::Euclidean, 0.0));
    }
    let corral = Corral {
        points: pts,
        norm: NormSpec::Euclidean,
        affine_min: &|s: &[usize], _warm: &[f64]| euclidean_affine_min(pts, s),
        // ⟨x, x - a_j⟩ = ‖x‖·gap
        stop: &|f: f64, gap: f64| f * gap <= tol * scale2,
        max_major: 50 * (pts.len() + pts[0].len()) + 100,
    };
    corral.run(hull)
}

/// Minimal `‖·‖_*` point of `conv(hull)`, with `*` the dual of `spec`.
pub fn min_dual_norm_point(
    hull: &HullSet,
    spec: NormSpec,
    tol: f64,
    max_iters: usize,
) -> Result<MinNormResult> {
    spec.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Input(format!("tolerance must be positive, got {tol}")));
    }
    let pts = hull.points();
    let scale = hull.max_dual_norm(spec);
    if scale == 0.0 {
        return Ok(MinNormResult::from_coefficients(hull, unit(pts.len(), 0), spec, 0.0));
    }
    let result = match spec {
        NormSpec::Euclidean => {
            let mut r = match min_norm_point_euclidean(hull, tol.min(DEFAULT_EUCLIDEAN_TOL)) {
                Ok(r) => r,
                Err(Error::ConvergenceFailure { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            // Report the gap on the norm scale like the other branches.
            r.tolerance_achieved = certified_gap(hull, &r.point, spec);
            r
        }
        NormSpec::P(_) => {
            let NormSpec::P(r) = spec.dual() else { unreachable!() };
            let corral = Corral {
                points: pts,
                norm: spec,
                affine_min: &|s: &[usize], warm: &[f64]| newton_affine_min(pts, s, warm, r),
                stop: &|_f: f64, gap: f64| gap <= tol * scale,
                max_major: max_iters.max(1),
            };
            corral.run(hull)?
        }
        NormSpec::L1 | NormSpec::Linf => polyhedral_min(hull, spec)?,
    };
    if result.tolerance_achieved > tol * scale.max(1.0) {
        return Err(Error::ConvergenceFailure {
            gap: result.tolerance_achieved,
            best: Box::new(result),
        });
    }
    Ok(result)
}

/// `‖x‖_* - minᵢ ⟨aᵢ, h⟩` for the best available unit `h` norming `x`.
fn certified_gap(hull: &HullSet, x: &[f64], spec: NormSpec) -> f64 {
    let f = spec.eval_dual(x);
    if f == 0.0 {
        return 0.0;
    }
    match spec {
        NormSpec::Euclidean | NormSpec::P(_) => match best_certificate(hull.points(), x, spec, &[]) {
            // 0 is also a lower bound, so the gap never exceeds f.
            Some((_, _, m)) => (f - m).clamp(0.0, f),
            None => f64::INFINITY,
        },
        NormSpec::L1 | NormSpec::Linf => f64::INFINITY,
    }
}

/// The unit `h` among the certificate candidates of `x = Σ λᵢ aᵢ` (see
/// [`best_certificate`]) that maximizes `minᵢ ⟨aᵢ, h⟩`.
pub(crate) fn certificate_direction(
    pts: &[Vec<f64>],
    x: &[f64],
    coefficients: &[f64],
    spec: NormSpec,
) -> Option<Vec<f64>> {
    let support: Vec<usize> = (0..coefficients.len()).filter(|&i| coefficients[i] > 0.0).collect();
    best_certificate(pts, x, spec, &support).map(|(h, _, _)| h)
}

/// Unit direction `h` maximizing `minᵢ ⟨aᵢ, h⟩`, with the minimizing index
/// and value. Any unit `h` is a valid lower bound by weak duality, so this
/// tries several and keeps the best:
///
/// - `j(x)` and `j` of copies of `x` with near-zero coordinates snapped to
///   zero. Snapping matters when the dual map is non-Lipschitz at zero
///   (`r < 2`), where a residual of 1e-14 in a coordinate would otherwise
///   show up as a gap of order 1e-4.
/// - for `p > 2`, the maximizer over the points of `support` (those with
///   positive weight in `x`) computed on the dual side
///   ([`polish_certificate`]). When `r` is close to 1 the optimal
///   `x` can have coordinates of order 1e-12 that round-off in `Σ μᵢ aᵢ`
///   cannot resolve, while the dual problem stays well conditioned.
fn best_certificate(
    pts: &[Vec<f64>],
    x: &[f64],
    spec: NormSpec,
    support: &[usize],
) -> Option<(Vec<f64>, usize, f64)> {
    let snapped = snapped_certificate(pts, x, spec)?;
    Some(polished(pts, snapped, spec, support))
}

fn score(pts: &[Vec<f64>], h: Vec<f64>) -> Option<(Vec<f64>, usize, f64)> {
    let (j, m) = pts
        .iter()
        .enumerate()
        .map(|(i, a)| (i, dot(a, &h)))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;
    Some((h, j, m))
}

/// The snapped `j(x)` candidates alone. Their minimizing index is the point
/// the corral should bring in next.
fn snapped_certificate(pts: &[Vec<f64>], x: &[f64], spec: NormSpec) -> Option<(Vec<f64>, usize, f64)> {
    let scale = max_abs(x);
    let mut best: Option<(Vec<f64>, usize, f64)> = None;
    let mut snapped = x.to_vec();
    for rel in [0.0, 1e-12, 1e-10, 1e-8, 1e-6, 1e-4] {
        snapped.iter_mut().for_each(|v| {
            if v.abs() <= rel * scale {
                *v = 0.0;
            }
        });
        let Ok(h) = dual_map(&snapped, spec) else {
            continue;
        };
        let cand = score(pts, h)?;
        if best.as_ref().is_none_or(|b| cand.2 > b.2) {
            best = Some(cand);
        }
    }
    best
}

/// `cert`, or its dual-side polish if that certifies more.
fn polished(
    pts: &[Vec<f64>],
    cert: (Vec<f64>, usize, f64),
    spec: NormSpec,
    support: &[usize],
) -> (Vec<f64>, usize, f64) {
    match polish_candidate(pts, &cert, spec, support) {
        Some(c) if c.2 > cert.2 => c,
        _ => cert,
    }
}

fn polish_candidate(
    pts: &[Vec<f64>],
    cert: &(Vec<f64>, usize, f64),
    spec: NormSpec,
    support: &[usize],
) -> Option<(Vec<f64>, usize, f64)> {
    match spec {
        NormSpec::P(p) if p > 2.0 && !support.is_empty() => {
            polish_certificate(pts, support, &cert.0, cert.2, p).and_then(|h| score(pts, h))
        }
        _ => None,
    }
}

/// Maximizer of `minᵢ ⟨aᵢ, h⟩` over the unit `p`-ball for `i` in `active`,
/// assuming all of them are tight: maximize `⟨a_last, h⟩` subject to
/// `⟨aᵢ - a_last, h⟩ = 0`. `h0` with value `m0` is the starting point. With `N` an orthonormal basis of that subspace
/// this is Newton on `½‖Nz‖_p² - ⟨Nᵀa_last, z⟩`, whose minimizer is a
/// multiple of the answer. Needs `p ≥ 2` for a bounded Hessian.
fn polish_certificate(pts: &[Vec<f64>], active: &[usize], h0: &[f64], m0: f64, p: f64) -> Option<Vec<f64>> {
    let n = h0.len();
    let last = &pts[*active.last()?];
    let k = active.len();
    let basis = if k == 1 {
        DMatrix::identity(n, n)
    } else {
        let c = DMatrix::from_fn(k - 1, n, |r, col| pts[active[r]][col] - last[col]);
        let eig = (c.transpose() * &c).symmetric_eigen();
        let tol = 1e-12 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let cols: Vec<_> = (0..n)
            .filter(|&i| eig.eigenvalues[i] <= tol)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        if cols.is_empty() {
            return None;
        }
        DMatrix::from_columns(&cols)
    };
    let g = basis.transpose() * DVector::from_column_slice(last);
    let phi = |z: &DVector<f64>| {
        let u = &basis * z;
        let (v, grad, hess) = psi(u.as_slice(), p);
        (v - g.dot(z), grad, hess)
    };
    // The minimizer has `‖Nz‖ = max ⟨a_last, h⟩ ≈ m0`; φ is convex, so any
    // start converges.
    let mut z = basis.transpose() * DVector::from_column_slice(h0) * m0.abs();
    let (mut val, mut grad, mut hess) = phi(&z);
    for _ in 0..100 {
        let gz = basis.transpose() * DVector::from_vec(grad.clone()) - &g;
        let mut hz = basis.transpose() * &hess * &basis;
        let ridge = 1e-14 * (1.0 + hz.trace().abs());
        for i in 0..hz.nrows() {
            hz[(i, i)] += ridge;
        }
        let step = -hz.cholesky()?.solve(&gz);
        let decrement = -gz.dot(&step);
        if !(decrement > 1e-32 * (1.0 + val.abs())) {
            break;
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let zt = &z + &step * t;
            let trial = phi(&zt);
            if trial.0 < val && trial.0 <= val - 1e-4 * t * decrement {
                next = Some((zt, trial));
                break;
            }
            t *= 0.5;
        }
        let Some((zt, (v, gr, he))) = next else {
            break;
        };
        z = zt;
        (val, grad, hess) = (v, gr, he);
    }
    let u = &basis * z;
    let norm = NormSpec::P(p).eval(u.as_slice());
    (norm > 0.0 && norm.is_finite()).then(|| u.iter().map(|v| v / norm).collect())
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

type AffineMin<'a> = dyn Fn(&[usize], &[f64]) -> Option<Vec<f64>> + 'a;

/// Wolfe-style active-set ("corral") method for a strictly convex norm.
struct Corral<'a> {
    points: &'a [Vec<f64>],
    norm: NormSpec,
    /// Minimizer of the norm over the affine hull of the given points,
    /// as weights summing to one.
    affine_min: &'a AffineMin<'a>,
    stop: &'a dyn Fn(f64, f64) -> bool,
    max_major: usize,
}

impl Corral<'_> {
    fn run(&self, hull: &HullSet) -> Result<MinNormResult> {
        let pts = self.points;
        let n_pts = pts.len();
        let start = (0..n_pts)
            .min_by(|&i, &j| {
                self.norm
                    .eval_dual(&pts[i])
                    .total_cmp(&self.norm.eval_dual(&pts[j]))
            })
            .unwrap_or(0);
        let mut set = vec![start];
        let mut lam = vec![1.0];
        let mut x = pts[start].clone();
        let mut best: Option<(f64, Vec<f64>, f64)> = None;

        for _ in 0..self.max_major {
            let f = self.norm.eval_dual(&x);
            if f <= 1e-15 * hull.max_dual_norm(self.norm) {
                return Ok(self.result(hull, &set, &lam, 0.0));
            }
            let cert = snapped_certificate(pts, &x, self.norm).ok_or(Error::ZeroVector)?;
            let polish = polish_candidate(pts, &cert, self.norm, &set);
            let m = polish.as_ref().map_or(cert.2, |c| c.2.max(cert.2));
            let gap = (f - m).clamp(0.0, f);
            // The polished direction is exact for the current set, so a
            // point it ranks worst outside the set is the one to bring in,
            // even when its bound is below the snapped one.
            let j = match &polish {
                Some(c) if !set.contains(&c.1) => c.1,
                _ => cert.1,
            };
            if best.as_ref().is_none_or(|b| gap < b.0) {
                best = Some((gap, self.full_coefficients(&set, &lam), f));
            }
            if (self.stop)(f, gap) {
                return Ok(self.result(hull, &set, &lam, gap));
            }
            if set.contains(&j) {
                break;
            }
            set.push(j);
            lam.push(0.0);

            let mut progressed = false;
            for _ in 0..=set.len() + 1 {
                let Some(mu) = (self.affine_min)(&set, &lam) else {
                    break;
                };
                if mu.iter().all(|&v| v > 0.0) {
                    lam = mu;
                    progressed = true;
                    break;
                }
                // Step toward the affine minimizer until a weight hits zero.
                let mut theta = 1.0_f64;
                let mut hit = 0;
                for (i, (&l, &u)) in lam.iter().zip(&mu).enumerate() {
                    if u <= 0.0 && l - u > 0.0 {
                        let t = l / (l - u);
                        if t < theta {
                            theta = t;
                            hit = i;
                        }
                    }
                }
                for (l, u) in lam.iter_mut().zip(&mu) {
                    *l = (1.0 - theta) * *l + theta * u;
                }
                lam[hit] = 0.0;
                let keep: Vec<bool> = lam.iter().map(|&l| l > 1e-15).collect();
                set = set.iter().zip(&keep).filter(|(_, k)| **k).map(|(s, _)| *s).collect();
                lam = lam.iter().zip(&keep).filter(|(_, k)| **k).map(|(l, _)| *l).collect();
                let s: f64 = lam.iter().sum();
                lam.iter_mut().for_each(|l| *l /= s);
                if set.len() == 1 {
                    lam = vec![1.0];
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                break;
            }
            x = combine_subset(pts, &set, &lam);
        }

        let (gap, coefficients, _) = best.unwrap_or((f64::INFINITY, unit(n_pts, start), 0.0));
        let best = MinNormResult::from_coefficients(hull, coefficients, self.norm, gap);
        Err(Error::ConvergenceFailure { gap, best: Box::new(best) })
    }

    fn full_coefficients(&self, set: &[usize], lam: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.points.len()];
        for (&i, &l) in set.iter().zip(lam) {
            c[i] += l;
        }
        c
    }

    fn result(&self, hull: &HullSet, set: &[usize], lam: &[f64], gap: f64) -> MinNormResult {
        MinNormResult::from_coefficients(hull, self.full_coefficients(set, lam), self.norm, gap)
    }
}

fn combine_subset(pts: &[Vec<f64>], set: &[usize], lam: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; pts[0].len()];
    for (&i, &l) in set.iter().zip(lam) {
        for (xi, pi) in x.iter_mut().zip(&pts[i]) {
            *xi += l * pi;
        }
    }
    x
}

/// Weights of the Euclidean nearest point to 0 in `aff{aᵢ : i ∈ set}`:
/// solve `(PᵀP + 11ᵀ) ξ = 1`, then `μ = ξ / Σξ`.
fn euclidean_affine_min(pts: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let k = set.len();
    let g = DMatrix::from_fn(k, k, |r, c| dot(&pts[set[r]], &pts[set[c]]) + 1.0);
    let xi = g.lu().solve(&DVector::from_element(k, 1.0))?;
    let s: f64 = xi.iter().sum();
    if !s.is_finite() || s == 0.0 {
        return None;
    }
    let mu: Vec<f64> = xi.iter().map(|v| v / s).collect();
    mu.iter().all(|v| v.is_finite()).then_some(mu)
}

/// `ψ(u) = ½‖u‖_r²` with gradient and Hessian.
fn psi(u: &[f64], r: f64) -> (f64, Vec<f64>, DMatrix<f64>) {
    let n = u.len();
    let norm = NormSpec::P(r).eval(u);
    if norm == 0.0 {
        return (0.0, vec![0.0; n], DMatrix::identity(n, n));
    }
    let w: Vec<f64> = u.iter().map(|v| sign(*v) * v.abs().powf(r - 1.0)).collect();
    let grad: Vec<f64> = w.iter().map(|v| norm.powf(2.0 - r) * v).collect();
    let floor = 1e-9 * max_abs(u);
    let mut hess = DMatrix::zeros(n, n);
    for i in 0..n {
        hess[(i, i)] = (r - 1.0) * norm.powf(2.0 - r) * u[i].abs().max(floor).powf(r - 2.0);
    }
    let c = (2.0 - r) * norm.powf(2.0 - 2.0 * r);
    for i in 0..n {
        for j in 0..n {
            hess[(i, j)] += c * w[i] * w[j];
        }
    }
    (0.5 * norm * norm, grad, hess)
}

/// Minimizer of `½‖Σ μᵢ aᵢ‖_r²` over `Σμ = 1` (indices in `set`), by damped
/// Newton in the coordinates `μ = warm + Σ βᵢ (eᵢ - e_last)`.
fn newton_affine_min(pts: &[Vec<f64>], set: &[usize], warm: &[f64], r: f64) -> Option<Vec<f64>> {
    let k = set.len();
    if k == 1 {
        return Some(vec![1.0]);
    }
    let n = pts[0].len();
    let last = &pts[set[k - 1]];
    // Columns aᵢ - a_last.
    let b = DMatrix::from_fn(n, k - 1, |row, col| pts[set[col]][row] - last[row]);
    let mut mu = warm.to_vec();
    let eval = |mu: &[f64]| combine_subset(pts, set, mu);
    let mut u = eval(&mu);
    let (mut val, _, _) = psi(&u, r);
    for _ in 0..200 {
        let (_, grad, hess) = psi(&u, r);
        let g = b.transpose() * DVector::from_vec(grad);
        let mut h = b.transpose() * &hess * &b;
        let ridge = 1e-14 * (1.0 + h.trace().abs());
        for i in 0..k - 1 {
            h[(i, i)] += ridge;
        }
        let step = match h.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -h.lu().solve(&g)?,
        };
        let decrement = -g.dot(&step);
        if !(decrement > 1e-30 * (1.0 + val)) {
            break;
        }
        // Keep halving while the value improves: near a zero coordinate with
        // r < 2 the full step overshoots to about `-u` and would oscillate.
        let trial_at = |t: f64| {
            let mut trial = mu.clone();
            for i in 0..k - 1 {
                trial[i] += t * step[i];
                trial[k - 1] -= t * step[i];
            }
            let ut = eval(&trial);
            let vt = psi(&ut, r).0;
            (trial, ut, vt)
        };
        let mut t = 1.0;
        let mut cur = trial_at(t);
        let mut accepted = None;
        for _ in 0..60 {
            let next = trial_at(0.5 * t);
            if cur.2 < val && cur.2 <= val - 1e-4 * t * decrement && next.2 >= cur.2 {
                accepted = Some(cur);
                break;
            }
            t *= 0.5;
            cur = next;
        }
        // At the optimum value differences drown in round-off while the
        // point is still off; then accept the full step if it shrinks the
        // reduced gradient.
        let accepted = accepted.or_else(|| {
            let full = trial_at(1.0);
            let flat = (full.2 - val).abs() <= 1e-13 * (1.0 + val.abs());
            let g_full = b.transpose() * DVector::from_vec(psi(&full.1, r).1);
            (flat && g_full.norm() < g.norm()).then_some(full)
        });
        let Some((trial, ut, vt)) = accepted else {
            break;
        };
        mu = trial;
        u = ut;
        val = vt;
    }
    mu.iter().all(|v| v.is_finite()).then_some(mu)
}

/// Exact minimizer for the polyhedral dual norms via a primal LP, certified by
/// the dual LP over the primal unit ball.
fn polyhedral_min(hull: &HullSet, spec: NormSpec) -> Result<MinNormResult> {
    let pts = hull.points();
    let (n_pts, n) = (pts.len(), hull.dim());
    let lp_err = |e: microlp::Error| Error::Lp(e.to_string());

    let mut primal = Problem::new(OptimizationDirection::Minimize);
    let lam: Vec<Variable> = (0..n_pts).map(|_| primal.add_var(0.0, (0.0, 1.0))).collect();
    primal.add_constraint(
        lam.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(),
        ComparisonOp::Eq,
        1.0,
    );
    let coord = |k: usize| -> LinearExpr {
        let mut e = LinearExpr::empty();
        for (i, v) in lam.iter().enumerate() {
            if pts[i][k] != 0.0 {
                e.add(*v, pts[i][k]);
            }
        }
        e
    };
    match spec.dual() {
        NormSpec::Linf => {
            let s = primal.add_var(1.0, (0.0, f64::INFINITY));
            for k in 0..n {
                let mut e = coord(k);
                e.add(s, -1.0);
                primal.add_constraint(e, ComparisonOp::Le, 0.0);
                let mut e = coord(k);
                e.add(s, 1.0);
                primal.add_constraint(e, ComparisonOp::Ge, 0.0);
            }
        }
        _ => {
            for k in 0..n {
                let u = primal.add_var(1.0, (0.0, f64::INFINITY));
                let mut e = coord(k);
                e.add(u, -1.0);
                primal.add_constraint(e, ComparisonOp::Le, 0.0);
                let mut e = coord(k);
                e.add(u, 1.0);
                primal.add_constraint(e, ComparisonOp::Ge, 0.0);
            }
        }
    }
    let sol = primal
        .solve()
        .map_err(lp_err)?
        .into_solution()
        .map_err(|_| Error::Lp("solve interrupted".into()))?;
    let coefficients: Vec<f64> = lam.iter().map(|v| sol.var_value(*v)).collect();

    let hv = max_min_direction(hull, spec)?;
    let lower = -support_unchecked(hull, &hv.iter().map(|v| -v).collect::<Vec<_>>());

    let mut result = MinNormResult::from_coefficients(hull, coefficients, spec, 0.0);
    result.tolerance_achieved = (result.norm_value - lower).max(0.0);
    Ok(result)
}

/// A unit `h` maximizing `minᵢ ⟨aᵢ, h⟩` for `spec ∈ {l1, linf}`, by LP:
/// `max t  s.t. ⟨aᵢ, h⟩ ≥ t, ‖h‖ ≤ 1`. Its negation is a steepest descent
/// direction for `conv(hull)`.
pub(crate) fn max_min_direction(hull: &HullSet, spec: NormSpec) -> Result<Vec<f64>> {
    let (pts, n) = (hull.points(), hull.dim());
    let lp_err = |e: microlp::Error| Error::Lp(e.to_string());
    let mut dual = Problem::new(OptimizationDirection::Maximize);
    let h: Vec<Variable> = (0..n).map(|_| dual.add_var(0.0, (-1.0, 1.0))).collect();
    let t = dual.add_var(1.0, (-f64::MAX, f64::MAX));
    for p in pts {
        let mut e = LinearExpr::empty();
        for (k, v) in h.iter().enumerate() {
            if p[k] != 0.0 {
                e.add(*v, p[k]);
            }
        }
        e.add(t, -1.0);
        dual.add_constraint(e, ComparisonOp::Ge, 0.0);
    }
    if spec == NormSpec::L1 {
        let a: Vec<Variable> = (0..n).map(|_| dual.add_var(0.0, (0.0, 1.0))).collect();
        for k in 0..n {
            dual.add_constraint([(a[k], 1.0), (h[k], -1.0)], ComparisonOp::Ge, 0.0);
            dual.add_constraint([(a[k], 1.0), (h[k], 1.0)], ComparisonOp::Ge, 0.0);
        }
        dual.add_constraint(
            a.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Le,
            1.0,
        );
    }
    let dsol = dual
        .solve()
        .map_err(lp_err)?
        .into_solution()
        .map_err(|_| Error::Lp("solve interrupted".into()))?;
    let mut hv: Vec<f64> = h.iter().map(|v| dsol.var_value(*v)).collect();
    let hn = spec.eval(&hv);
    if hn > 1.0 {
        hv.iter_mut().for_each(|v| *v /= hn);
    }
    Ok(hv)
}

/// Deterministic directions on the unit sphere of `spec` in ℝ¹, ℝ² (angle
/// grid) or ℝ³ (Fibonacci lattice).
pub fn sphere_directions(dim: usize, spec: NormSpec, samples: usize) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..samples)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / samples as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..samples)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / samples as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            return Err(Error::Input(format!(
                "sphere sampling supports dimensions 1-3, got {dim}"
            )))
        }
    };
    Ok(raw
        .into_iter()
        .map(|d| {
            let n = spec.eval(&d);
            d.into_iter().map(|v| v / n).collect()
        })
        .collect())
}

/// `|min_h f°(h) + min_a ‖a‖_*|` with the first minimum over the unit ball,
/// sampled as the origin plus unit directions: an empirical check of
/// min-max exchange. The origin matters when the hull contains 0.
pub fn minmax_gap(hull: &HullSet, spec: NormSpec, samples: usize) -> Result<f64> {
    let dirs = sphere_directions(hull.dim(), spec, samples)?;
    let inf = dirs
        .iter()
        .map(|h| support_unchecked(hull, h))
        .fold(0.0, f64::min);
    let mn = match min_dual_norm_point(hull, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS) {
        Ok(r) => r,
        Err(Error::ConvergenceFailure { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    Ok((inf + mn.norm_value).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hull::Provenance;
    use crate::vector::{max_abs_diff, sub};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hull(points: &[&[f64]]) -> HullSet {
        HullSet::new(points.iter().map(|p| p.to_vec()).collect(), Provenance::Exact).unwrap()
    }

    fn check_euclidean_optimality(h: &HullSet, r: &MinNormResult, tol: f64) {
        assert_abs_diff_eq!(r.coefficients.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(r.coefficients.iter().all(|&c| c >= 0.0));
        assert!(max_abs_diff(&combine(h.points(), &r.coefficients), &r.point) <= 1e-12);
        for a in h.points() {
            assert!(dot(&r.point, &sub(a, &r.point)) >= -tol, "VI violated");
        }
    }

    #[test]
    fn valley_hull() {
        let h = hull(&[&[1.0, 0.01], &[-1.0, 0.01]]);
        let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
        assert!(max_abs_diff(&r.point, &[0.0, 0.01]) <= 1e-12);
        assert!(max_abs_diff(&r.coefficients, &[0.5, 0.5]) <= 1e-12);
        assert_abs_diff_eq!(r.norm_value, 0.01, epsilon = 1e-14);
        check_euclidean_optimality(&h, &r, 1e-10);
    }

    #[test]
    fn small_hulls() {
        let h = hull(&[&[2.0, -1.0]]);
        assert_eq!(min_norm_point_euclidean(&h, 1e-10).unwrap().point, vec![2.0, -1.0]);

        let h = hull(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
        assert!(max_abs_diff(&r.point, &[0.5, 0.5]) <= 1e-15);

        let h = hull(&[&[1.0, 1.0], &[-1.0, 0.5], &[0.2, -2.0]]);
        let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
        assert!(r.norm_value <= 1e-12);
        check_euclidean_optimality(&h, &r, 1e-10);

        assert!(min_norm_point_euclidean(&h, 0.0).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        let h = hull(&[&[1.0, -1.0], &[1.0, 1.0]]);
        let r = min_dual_norm_point(&h, NormSpec::L1, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_abs_diff_eq!(r.norm_value, 1.0, epsilon = 1e-12);

        let h = hull(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = min_dual_norm_point(&h, NormSpec::Linf, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_abs_diff_eq!(r.norm_value, 1.0, epsilon = 1e-12);

        let h = hull(&[&[0.0, 0.0], &[3.0, -1.0]]);
        for spec in [NormSpec::Euclidean, NormSpec::P(3.0), NormSpec::L1, NormSpec::Linf] {
            let r = min_dual_norm_point(&h, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert_abs_diff_eq!(r.norm_value, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn p_norm_solver_matches_parametric_minimum() {
        // Segment between two points: minimize over λ by golden-section search.
        for p in [1.5, 3.0, 4.0] {
            let spec = NormSpec::P(p);
            let a = [1.0, 0.3];
            let b = [-0.4, 0.9];
            let h = hull(&[&a, &b]);
            let f = |l: f64| spec.eval_dual(&[l * a[0] + (1.0 - l) * b[0], l * a[1] + (1.0 - l) * b[1]]);
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..200 {
                let m1 = lo + (hi - lo) * 0.381966;
                let m2 = lo + (hi - lo) * 0.618034;
                if f(m1) < f(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let r = min_dual_norm_point(&h, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert_abs_diff_eq!(r.norm_value, f(0.5 * (lo + hi)), epsilon = 1e-10);
            assert!(r.tolerance_achieved <= 1e-8);
        }
    }

    #[test]
    fn p_norm_with_tiny_coordinate_optimum() {
        // Dual norm l_{4/3}: the optimum has x1 ≈ 7.7e-7, where the value is
        // flat to round-off but the certificate is not.
        let h = hull(&[&[2.0275533459907136, -2.016231635265147], &[-1.2698439486322486, -2.0401159460860563]]);
        let r = min_dual_norm_point(&h, NormSpec::P(4.0), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!(r.tolerance_achieved <= DEFAULT_TOL);
        assert!(r.point[0] > 0.0 && r.point[0] < 1e-6, "{:?}", r.point);
    }

    #[test]
    fn p_norm_with_zero_coordinate_optimum() {
        let h = hull(&[&[1.0, 0.01], &[-1.0, 0.01]]);
        for p in [1.5, 3.0, 4.0] {
            let r = min_dual_norm_point(&h, NormSpec::P(p), DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            assert!(max_abs_diff(&r.point, &[0.0, 0.01]) <= 1e-9, "p={p}: {:?}", r.point);
        }
    }

    #[test]
    fn minmax_examples() {
        let h = hull(&[&[0.0, 1.0]]);
        assert!(minmax_gap(&h, NormSpec::Euclidean, 10_000).unwrap() <= 1e-3);
        let h = hull(&[&[1.0, 0.01], &[-1.0, 0.01]]);
        assert!(minmax_gap(&h, NormSpec::Euclidean, 10_000).unwrap() <= 1e-3);
        let h = hull(&[&[1.0, -1.0], &[1.0, 1.0]]);
        assert!(minmax_gap(&h, NormSpec::L1, 10_000).unwrap() <= 1e-3);
        let h = hull(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.5]]);
        assert!(minmax_gap(&h, NormSpec::Euclidean, 10_000).unwrap() <= 1e-2);
        // 0 inside the hull: every unit direction ascends, h = 0 attains the min.
        let h = hull(&[&[0.6, -0.8], &[-1.0, -0.4], &[0.4, 0.4]]);
        for spec in [NormSpec::Euclidean, NormSpec::L1, NormSpec::Linf] {
            assert!(minmax_gap(&h, spec, 1000).unwrap() <= 1e-9);
        }
        let h4 = hull(&[&[1.0, 0.0, 0.0, 0.0]]);
        assert!(minmax_gap(&h4, NormSpec::Euclidean, 100).is_err());
    }

    #[test]
    fn zero_in_hull_means_no_descent_direction_in_samples() {
        let h = hull(&[&[1.0, 0.2], &[-0.5, 1.0], &[-0.3, -1.1]]);
        let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
        assert!(r.norm_value <= 1e-12);
        let slack = 1e-9 * h.diameter();
        for d in sphere_directions(2, NormSpec::Euclidean, 4096).unwrap() {
            assert!(support_unchecked(&h, &d) >= -slack);
        }
    }

    fn arb_points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), 1..7)
    }

    proptest! {
        #[test]
        fn wolfe_satisfies_variational_inequality(pts in arb_points(3)) {
            let h = HullSet::new(pts, Provenance::Exact).unwrap();
            let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
            let scale = h.points().iter().map(|p| dot(p, p)).fold(0.0, f64::max);
            for a in h.points() {
                prop_assert!(dot(&r.point, &sub(a, &r.point)) >= -1e-9 * scale.max(1.0));
            }
            prop_assert!(max_abs_diff(&combine(h.points(), &r.coefficients), &r.point) <= 1e-12);
        }

        #[test]
        fn scale_equivariance(pts in arb_points(2), c in 0.01..100.0f64) {
            let h = HullSet::new(pts, Provenance::Exact).unwrap();
            let r = min_norm_point_euclidean(&h, 1e-10).unwrap();
            let rc = min_norm_point_euclidean(&h.scale(c).unwrap(), 1e-10).unwrap();
            let expect: Vec<f64> = r.point.iter().map(|v| c * v).collect();
            prop_assert!(max_abs_diff(&rc.point, &expect) <= 1e-8 * c.max(1.0));
        }

        #[test]
        fn p_norm_solver_certifies(pts in arb_points(2), p in prop::sample::select(vec![1.5, 3.0, 4.0])) {
            let h = HullSet::new(pts, Provenance::Exact).unwrap();
            let spec = NormSpec::P(p);
            let r = min_dual_norm_point(&h, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            // Certified: no hull point, and no sampled convex pair, beats it.
            for a in h.points() {
                prop_assert!(spec.eval_dual(a) >= r.norm_value - 1e-8);
            }
            let pts = h.points();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    for k in 1..20 {
                        let l = k as f64 / 20.0;
                        let m: Vec<f64> = pts[i].iter().zip(&pts[j]).map(|(a, b)| l * a + (1.0 - l) * b).collect();
                        prop_assert!(spec.eval_dual(&m) >= r.norm_value - 1e-8);
                    }
                }
            }
        }

        #[test]
        fn polyhedral_solver_certifies(pts in arb_points(3), spec in prop::sample::select(vec![NormSpec::L1, NormSpec::Linf])) {
            let h = HullSet::new(pts, Provenance::Exact).unwrap();
            let r = min_dual_norm_point(&h, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
            prop_assert!(r.tolerance_achieved <= 1e-8 * h.max_dual_norm(spec).max(1.0));
            for a in h.points() {
                prop_assert!(spec.eval_dual(a) >= r.norm_value - 1e-9);
            }
        }
    }
}
