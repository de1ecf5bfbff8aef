//! Does an affine piece of a max-affine function attain the max somewhere on
//! a region?
//!
//! For piece `k` let `ψ(y) = min_j (g_k - g_j)(y)`; the piece is active on `A`
//! iff `max_{y ∈ A} ψ(y) ≥ 0`. Cheap bounds settle most cases; the rest go to
//! an LP over the region. Balls under curved norms are outer-approximated by
//! supporting half-spaces added until the LP optimum lies in the ball.

use microlp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem, Variable};

use crate::error::{Error, Result};
use crate::norms::{norming_functional, NormSpec};
use crate::region::Region;
use crate::vector::{dot, sub};

/// Slack below which a piece counts as attaining the max.
pub const ACTIVE_TOL: f64 = 1e-12;
/// LP optima within this (relative) band of zero are treated as active.
const LP_TOL: f64 = 1e-9;
const MAX_CUTS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct AffinePiece {
    pub c: Vec<f64>,
    pub b: f64,
}

impl AffinePiece {
    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.c, x) + self.b
    }
}

/// `ψ(y) = min_{j ≠ k} (g_k - g_j)(y)`, `+∞` with a single piece.
fn slack(pieces: &[AffinePiece], k: usize, y: &[f64]) -> f64 {
    let gk = pieces[k].eval(y);
    pieces
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, p)| gk - p.eval(y))
        .fold(f64::INFINITY, f64::min)
}

/// Pull `y` back into the region (radially for balls, clamping otherwise).
fn project_into(region: &Region, y: &[f64]) -> Vec<f64> {
    match region {
        Region::Ball(b) => {
            let z = sub(y, &b.center);
            let n = b.norm.eval(&z);
            if n <= b.radius {
                y.to_vec()
            } else {
                let s = b.radius / n;
                b.center.iter().zip(&z).map(|(c, d)| c + s * d).collect()
            }
        }
        Region::Box { lo, hi } => y
            .iter()
            .zip(lo.iter().zip(hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect(),
        Region::Segment { start, end } => {
            let d = sub(end, start);
            let dd = dot(&d, &d);
            let s = if dd == 0.0 {
                0.0
            } else {
                (dot(&sub(y, start), &d) / dd).clamp(0.0, 1.0)
            };
            start.iter().zip(&d).map(|(a, v)| a + s * v).collect()
        }
    }
}

/// Whether piece `k` attains the maximum somewhere on `region`.
///
/// Undecidable near-ties resolve to `true`: including an extra piece only
/// enlarges the hull, which keeps support values upper bounds.
pub fn piece_active(pieces: &[AffinePiece], k: usize, region: &Region) -> Result<bool> {
    if pieces.len() == 1 {
        return Ok(true);
    }
    let center = region.center();
    let at_center = slack(pieces, k, &center);
    let scale = 1.0
        + pieces
            .iter()
            .map(|p| (pieces[k].eval(&center) - p.eval(&center)).abs())
            .fold(0.0, f64::max);
    if at_center >= -ACTIVE_TOL * scale {
        return Ok(true);
    }
    for anchor in region.anchors() {
        if slack(pieces, k, &anchor) >= -ACTIVE_TOL * scale {
            return Ok(true);
        }
    }

    // Upper bound: each difference is affine, so its max over the region
    // is its value at the center plus the region's support in that direction.
    let upper = pieces
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, p)| {
            let d = sub(&pieces[k].c, &p.c);
            let at_c = dot(&d, &center) + pieces[k].b - p.b;
            at_c + support_offset(region, &center, &d)
        })
        .fold(f64::INFINITY, f64::min);
    if upper < -ACTIVE_TOL * scale {
        return Ok(false);
    }
    lp_active(pieces, k, region, scale)
}

/// `max_{y ∈ A} ⟨d, y - center⟩`.
fn support_offset(region: &Region, center: &[f64], d: &[f64]) -> f64 {
    match region {
        Region::Ball(b) => b.radius * b.norm.eval_dual(d),
        Region::Box { lo, hi } => d
            .iter()
            .zip(lo.iter().zip(hi))
            .zip(center)
            .map(|((di, (l, h)), c)| (di * (l - c)).max(di * (h - c)))
            .sum(),
        Region::Segment { start, end } => {
            (dot(d, &sub(start, center))).max(dot(d, &sub(end, center)))
        }
    }
}

struct Lp {
    problem: Problem,
    y: Vec<Variable>,
    t: Variable,
}

fn build_lp(pieces: &[AffinePiece], k: usize, region: &Region) -> Lp {
    let n = region.dim();
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let bound = |i: usize| -> (f64, f64) {
        match region {
            Region::Ball(b) => (b.center[i] - b.radius, b.center[i] + b.radius),
            Region::Box { lo, hi } => (lo[i], hi[i]),
            Region::Segment { start, end } => (start[i].min(end[i]), start[i].max(end[i])),
        }
    };
    let y: Vec<Variable> = (0..n).map(|i| problem.add_var(0.0, bound(i))).collect();
    let t = problem.add_var(1.0, (-1e12, 1e12));

    for (j, p) in pieces.iter().enumerate() {
        if j == k {
            continue;
        }
        // (c_k - c_j)·y - t >= b_j - b_k
        let mut e = LinearExpr::empty();
        for (i, v) in y.iter().enumerate() {
            let coef = pieces[k].c[i] - p.c[i];
            if coef != 0.0 {
                e.add(*v, coef);
            }
        }
        e.add(t, -1.0);
        problem.add_constraint(e, ComparisonOp::Ge, p.b - pieces[k].b);
    }

    match region {
        Region::Box { .. } => {}
        Region::Segment { start, end } => {
            let s = problem.add_var(0.0, (0.0, 1.0));
            for i in 0..n {
                // y_i - (end_i - start_i) s = start_i
                let mut e = LinearExpr::empty();
                e.add(y[i], 1.0);
                let d = end[i] - start[i];
                if d != 0.0 {
                    e.add(s, -d);
                }
                problem.add_constraint(e, ComparisonOp::Eq, start[i]);
            }
        }
        Region::Ball(b) => match b.norm {
            NormSpec::Linf => {}
            NormSpec::L1 => {
                let u: Vec<Variable> = (0..n).map(|_| problem.add_var(0.0, (0.0, b.radius))).collect();
                for i in 0..n {
                    problem.add_constraint([(u[i], 1.0), (y[i], -1.0)], ComparisonOp::Ge, -b.center[i]);
                    problem.add_constraint([(u[i], 1.0), (y[i], 1.0)], ComparisonOp::Ge, b.center[i]);
                }
                let e: Vec<(Variable, f64)> = u.iter().map(|v| (*v, 1.0)).collect();
                problem.add_constraint(e, ComparisonOp::Le, b.radius);
            }
            NormSpec::Euclidean | NormSpec::P(_) => {}
        },
    }
    Lp { problem, y, t }
}

fn add_cut(lp: &mut Lp, center: &[f64], g: &[f64], radius: f64) {
    // ⟨g, y - center⟩ <= radius
    let mut e = LinearExpr::empty();
    for (i, v) in lp.y.iter().enumerate() {
        if g[i] != 0.0 {
            e.add(*v, g[i]);
        }
    }
    lp.problem
        .add_constraint(e, ComparisonOp::Le, radius + dot(g, center));
}

fn lp_active(pieces: &[AffinePiece], k: usize, region: &Region, scale: f64) -> Result<bool> {
    let mut lp = build_lp(pieces, k, region);
    let curved = matches!(region, Region::Ball(b) if b.norm.strictly_convex());
    if let (true, Region::Ball(b)) = (curved, region) {
        // Seed the outer approximation with cuts along coordinate diagonals.
        let n = region.dim();
        if n <= 4 {
            for mask in 0u32..(1 << n) {
                let z: Vec<f64> = (0..n)
                    .map(|i| if mask >> i & 1 == 0 { 1.0 } else { -1.0 })
                    .collect();
                add_cut(&mut lp, &b.center, &norming_functional(&z, b.norm), b.radius);
            }
        }
    }
    for _ in 0..MAX_CUTS {
        let outcome = match lp.problem.solve() {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => return Ok(false),
            Err(e) => return Err(Error::Lp(e.to_string())),
        };
        let sol = outcome
            .into_solution()
            .map_err(|_| Error::Lp("solve interrupted".into()))?;
        let t_star = sol.var_value(lp.t);
        if t_star < -LP_TOL * scale {
            return Ok(false);
        }
        let y_star: Vec<f64> = lp.y.iter().map(|v| sol.var_value(*v)).collect();
        let y_in = project_into(region, &y_star);
        if slack(pieces, k, &y_in) >= -ACTIVE_TOL * scale {
            return Ok(true);
        }
        let Region::Ball(b) = region else {
            // Polyhedral region solved exactly up to LP tolerance: a near-tie.
            return Ok(true);
        };
        if !curved {
            return Ok(true);
        }
        let z = sub(&y_star, &b.center);
        if b.norm.eval(&z) <= b.radius * (1.0 + 1e-12) {
            return Ok(true);
        }
        add_cut(&mut lp, &b.center, &norming_functional(&z, b.norm), b.radius);
    }
    Ok(true)
}
