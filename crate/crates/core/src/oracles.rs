//! Nonsmooth, locally Lipschitz test functions.
//!
//! Every built-in is piecewise affine, so besides values and almost-everywhere
//! gradients each one can report the exact generalized gradient of a region:
//! the gradients of those pieces that attain the max somewhere on it.

use serde::{Deserialize, Serialize};

use crate::activity::{piece_active, AffinePiece, ACTIVE_TOL};
use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormSpec;
use crate::region::Region;
use crate::vector::{dot, sub};

/// Limit on sign patterns enumerated for separable functions.
const PATTERN_LIMIT: usize = 1 << 16;

pub trait FunctionOracle: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// A gradient valid wherever `f` is differentiable, with a fixed
    /// deterministic selection on the kink set.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// A Lipschitz rank of `f` on `B̄_radius(center)` w.r.t. `norm`.
    fn lipschitz_bound(&self, center: &[f64], radius: f64, norm: NormSpec) -> f64;

    /// Vertices whose convex hull is `∂f(A)`.
    fn exact_subdiff(&self, region: &Region) -> Result<Vec<Vec<f64>>> {
        let _ = region;
        Err(Error::Unsupported(format!(
            "`{}` has no exact generalized gradient",
            self.name()
        )))
    }

    fn has_exact_subdiff(&self) -> bool {
        false
    }
}

/// `f(x) = max_k ⟨c_k, x⟩ + b_k` as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxAffineSpec {
    pub dim: usize,
    pub pieces: Vec<PieceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub c: Vec<f64>,
    pub b: f64,
}

impl MaxAffineSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Input("max_affine dimension must be positive".into()));
        }
        if self.pieces.is_empty() {
            return Err(Error::Input("max_affine needs at least one piece".into()));
        }
        for p in &self.pieces {
            check_dim(self.dim, p.c.len())?;
            check_finite(&p.c)?;
            check_finite(&[p.b])?;
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: MaxAffineSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Form {
    /// `⟨linear, x⟩ + Σ wᵢ|xᵢ|`
    Separable { linear: Vec<f64>, weights: Vec<f64> },
    MaxAffine(Vec<AffinePiece>),
}

/// A piecewise-affine function with an exact generalized-gradient oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseAffine {
    name: String,
    dim: usize,
    form: Form,
}

impl PiecewiseAffine {
    pub fn abs1d() -> Self {
        Self::separable("abs1d", vec![0.0], vec![1.0])
    }

    /// `|x₁| + α|x₂|`
    pub fn valley(alpha: f64) -> Self {
        Self::separable("valley", vec![0.0, 0.0], vec![1.0, alpha])
    }

    /// `x₁ + |x₂|`
    pub fn skewed_abs() -> Self {
        Self::separable("skewed_abs", vec![1.0, 0.0], vec![0.0, 1.0])
    }

    /// `½(x + y + |x - y|) = max(x, y)`
    pub fn half_max() -> Self {
        Self {
            name: "half_max".into(),
            dim: 2,
            form: Form::MaxAffine(vec![
                AffinePiece { c: vec![1.0, 0.0], b: 0.0 },
                AffinePiece { c: vec![0.0, 1.0], b: 0.0 },
            ]),
        }
    }

    pub fn weighted_abs(weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self::separable("weighted_abs", vec![0.0; n], weights)
    }

    pub fn linear(c: Vec<f64>) -> Self {
        let n = c.len();
        Self::separable("linear", c, vec![0.0; n])
    }

    pub fn max_affine(spec: &MaxAffineSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            name: "max_affine".into(),
            dim: spec.dim,
            form: Form::MaxAffine(
                spec.pieces
                    .iter()
                    .map(|p| AffinePiece { c: p.c.clone(), b: p.b })
                    .collect(),
            ),
        })
    }

    fn separable(name: &str, linear: Vec<f64>, weights: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            dim: linear.len(),
            form: Form::Separable { linear, weights },
        }
    }

    /// The affine pieces in their canonical order (sign patterns count up
    /// from all-`+` for separable functions).
    pub fn pieces(&self) -> Result<Vec<AffinePiece>> {
        match &self.form {
            Form::MaxAffine(p) => Ok(p.clone()),
            Form::Separable { linear, weights } => {
                let kinks: Vec<usize> = (0..self.dim).filter(|&i| weights[i] != 0.0).collect();
                if kinks.len() > 16 {
                    return Err(Error::Unsupported("too many sign regions".into()));
                }
                Ok((0..1usize << kinks.len())
                    .map(|mask| AffinePiece {
                        c: separable_gradient(linear, weights, &kinks, mask),
                        b: 0.0,
                    })
                    .collect())
            }
        }
    }

    fn separable_subdiff(
        &self,
        linear: &[f64],
        weights: &[f64],
        region: &Region,
    ) -> Result<Vec<Vec<f64>>> {
        let kinks: Vec<usize> = (0..self.dim).filter(|&i| weights[i] != 0.0).collect();
        if kinks.len() > 16 {
            return Err(Error::Unsupported(format!(
                "{} kink coordinates exceed the enumeration limit",
                kinks.len()
            )));
        }
        let mut out = Vec::new();
        let mut visit = |mask: usize| -> Result<()> {
            if out.len() >= PATTERN_LIMIT {
                return Err(Error::Unsupported("too many active sign regions".into()));
            }
            out.push(separable_gradient(linear, weights, &kinks, mask));
            Ok(())
        };
        let feasible = |mask: usize| -> bool {
            let s = |bit: usize| if mask >> bit & 1 == 0 { 1.0 } else { -1.0 };
            match region {
                Region::Ball(b) => {
                    // Distance to the closed orthant; exact for absolute norms.
                    let mut v = vec![0.0; self.dim];
                    for (bit, &i) in kinks.iter().enumerate() {
                        v[i] = (-s(bit) * b.center[i]).max(0.0);
                    }
                    b.norm.eval(&v) <= b.radius + ACTIVE_TOL
                }
                Region::Box { lo, hi } => kinks.iter().enumerate().all(|(bit, &i)| {
                    if s(bit) > 0.0 {
                        hi[i] >= -ACTIVE_TOL
                    } else {
                        lo[i] <= ACTIVE_TOL
                    }
                }),
                Region::Segment { start, end } => {
                    // s·(start + t(end - start)) >= 0 for t in [0, 1].
                    let (mut tlo, mut thi) = (0.0_f64, 1.0_f64);
                    for (bit, &i) in kinks.iter().enumerate() {
                        let a = s(bit) * start[i];
                        let d = s(bit) * (end[i] - start[i]);
                        if d == 0.0 {
                            if a < -ACTIVE_TOL {
                                return false;
                            }
                        } else if d > 0.0 {
                            tlo = tlo.max((-ACTIVE_TOL - a) / d);
                        } else {
                            thi = thi.min((-ACTIVE_TOL - a) / d);
                        }
                    }
                    tlo <= thi
                }
            }
        };
        for mask in 0..1usize << kinks.len() {
            if feasible(mask) {
                visit(mask)?;
            }
        }
        Ok(out)
    }
}

fn separable_gradient(linear: &[f64], weights: &[f64], kinks: &[usize], mask: usize) -> Vec<f64> {
    let mut g = linear.to_vec();
    for (bit, &i) in kinks.iter().enumerate() {
        let s = if mask >> bit & 1 == 0 { 1.0 } else { -1.0 };
        g[i] += s * weights[i];
    }
    g
}

impl FunctionOracle for PiecewiseAffine {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        match &self.form {
            Form::Separable { linear, weights } => {
                dot(linear, x) + weights.iter().zip(x).map(|(w, v)| w * v.abs()).sum::<f64>()
            }
            Form::MaxAffine(p) => p.iter().map(|p| p.eval(x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// At a kink, `|t|` contributes `+w` (the all-`+` pattern comes first);
    /// for max-affine the first maximal piece wins.
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.form {
            Form::Separable { linear, weights } => linear
                .iter()
                .zip(weights)
                .zip(x)
                .map(|((l, w), v)| l + if *v < 0.0 { -w } else { *w })
                .collect(),
            Form::MaxAffine(p) => {
                let mut best = 0;
                let mut best_v = f64::NEG_INFINITY;
                for (k, piece) in p.iter().enumerate() {
                    let v = piece.eval(x);
                    if v > best_v {
                        best = k;
                        best_v = v;
                    }
                }
                p[best].c.clone()
            }
        }
    }

    fn lipschitz_bound(&self, _center: &[f64], _radius: f64, norm: NormSpec) -> f64 {
        match &self.form {
            // Dual lp norms are monotone in |aᵢ|, so the worst sign pattern
            // is the componentwise bound.
            Form::Separable { linear, weights } => {
                let worst: Vec<f64> = linear
                    .iter()
                    .zip(weights)
                    .map(|(l, w)| l.abs() + w.abs())
                    .collect();
                norm.eval_dual(&worst)
            }
            Form::MaxAffine(p) => p
                .iter()
                .map(|piece| norm.eval_dual(&piece.c))
                .fold(0.0, f64::max),
        }
    }

    fn exact_subdiff(&self, region: &Region) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim, region.dim())?;
        match &self.form {
            Form::Separable { linear, weights } => self.separable_subdiff(linear, weights, region),
            Form::MaxAffine(pieces) => {
                let mut out: Vec<Vec<f64>> = Vec::new();
                for k in 0..pieces.len() {
                    if out.iter().any(|c| *c == pieces[k].c) {
                        continue;
                    }
                    if piece_active(pieces, k, region)? {
                        out.push(pieces[k].c.clone());
                    }
                }
                Ok(out)
            }
        }
    }

    fn has_exact_subdiff(&self) -> bool {
        true
    }
}

/// Construct a built-in by name.
///
/// | name | params |
/// |---|---|
/// | `abs1d`, `skewed_abs`, `half_max` | none |
/// | `valley` | `α` |
/// | `weighted_abs` | `w₁ … wₙ` |
/// | `linear` | `c₁ … cₙ` |
/// | `max_affine` | `n, c₁₁ … c₁ₙ, b₁, c₂₁ …` |
pub fn builtin(name: &str, params: &[f64]) -> Result<PiecewiseAffine> {
    check_finite(params)?;
    let arity = |expected: &str| Error::BadArity {
        name: name.to_string(),
        expected: expected.to_string(),
        got: params.len(),
    };
    match name {
        "abs1d" | "skewed_abs" | "half_max" if !params.is_empty() => Err(arity("0")),
        "abs1d" => Ok(PiecewiseAffine::abs1d()),
        "skewed_abs" => Ok(PiecewiseAffine::skewed_abs()),
        "half_max" => Ok(PiecewiseAffine::half_max()),
        "valley" => match params {
            [alpha] => Ok(PiecewiseAffine::valley(*alpha)),
            _ => Err(arity("1")),
        },
        "weighted_abs" | "linear" if params.is_empty() => Err(arity(">= 1")),
        "weighted_abs" => Ok(PiecewiseAffine::weighted_abs(params.to_vec())),
        "linear" => Ok(PiecewiseAffine::linear(params.to_vec())),
        "max_affine" => {
            let Some((&n, rest)) = params.split_first() else {
                return Err(arity("1 + k(n + 1)"));
            };
            if n < 1.0 || n.fract() != 0.0 {
                return Err(arity("1 + k(n + 1)"));
            }
            let n = n as usize;
            if rest.is_empty() || rest.len() % (n + 1) != 0 {
                return Err(arity("1 + k(n + 1)"));
            }
            let spec = MaxAffineSpec {
                dim: n,
                pieces: rest
                    .chunks(n + 1)
                    .map(|ch| PieceSpec { c: ch[..n].to_vec(), b: ch[n] })
                    .collect(),
            };
            PiecewiseAffine::max_affine(&spec)
        }
        other => Err(Error::UnknownFunction(other.to_string())),
    }
}

/// `∂f(B̄ε(x))` for a function with an exact oracle; `ε = 0` gives the
/// Clarke generalized gradient at `x`.
pub fn exact_ball_subdiff(
    oracle: &dyn FunctionOracle,
    x: &[f64],
    eps: f64,
    norm: NormSpec,
) -> Result<Vec<Vec<f64>>> {
    if !oracle.has_exact_subdiff() {
        return Err(Error::Unsupported(format!(
            "`{}` has no exact generalized gradient",
            oracle.name()
        )));
    }
    oracle.exact_subdiff(&Region::ball(x.to_vec(), eps, norm)?)
}

/// Largest violation of `|f(x) - f(y)| ≤ L‖x - y‖` over the given pairs
/// (positive means the bound failed).
pub fn lipschitz_violation(
    oracle: &dyn FunctionOracle,
    l: f64,
    norm: NormSpec,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> f64 {
    pairs
        .iter()
        .map(|(x, y)| (oracle.value(x) - oracle.value(y)).abs() - l * norm.eval(&sub(x, y)))
        .fold(f64::NEG_INFINITY, f64::max)
}
