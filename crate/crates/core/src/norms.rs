//! Norms on ℝⁿ, their duals, and the dual mapping.
//!
//! A [`NormSpec`] names the norm of the primal space. Dual vectors (gradients,
//! hull points) are measured with `spec.dual()`. The dual map `j` sends a
//! nonzero dual vector `a` to the unit primal vector with `⟨a, j(a)⟩ = ‖a‖`;
//! it is single-valued only for strictly convex norms, so `l1`/`linf` go
//! through [`dual_face`] instead.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::vector::{dot, max_abs, sign};

/// Maximum number of vertices [`dual_face`] will enumerate (2^16).
pub const FACE_VERTEX_LIMIT: u128 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum NormSpec {
    #[default]
    Euclidean,
    /// `p`-norm with `1 < p < ∞`, `p != 2` (use [`NormSpec::p`] to construct).
    P(f64),
    L1,
    Linf,
}

impl NormSpec {
    /// Validated `p`-norm; `p = 2` normalizes to [`NormSpec::Euclidean`].
    pub fn p(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::Input(format!("p-norm requires 1 < p < inf, got {p}")));
        }
        if p == 2.0 {
            Ok(NormSpec::Euclidean)
        } else {
            Ok(NormSpec::P(p))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let NormSpec::P(p) = *self {
            NormSpec::p(p)?;
        }
        Ok(())
    }

    pub fn strictly_convex(&self) -> bool {
        matches!(self, NormSpec::Euclidean | NormSpec::P(_))
    }

    /// The norm of the dual space. An involution.
    pub fn dual(&self) -> NormSpec {
        match *self {
            NormSpec::Euclidean => NormSpec::Euclidean,
            NormSpec::P(p) => NormSpec::P(p / (p - 1.0)),
            NormSpec::L1 => NormSpec::Linf,
            NormSpec::Linf => NormSpec::L1,
        }
    }

    /// `‖x‖` without input validation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            NormSpec::Euclidean => {
                let m = max_abs(x);
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v / m) * (v / m)).sum::<f64>().sqrt()
            }
            NormSpec::P(p) => {
                let m = max_abs(x);
                if m == 0.0 {
                    return 0.0;
                }
                m * x
                    .iter()
                    .map(|v| (v.abs() / m).powf(p))
                    .sum::<f64>()
                    .powf(1.0 / p)
            }
            NormSpec::L1 => x.iter().map(|v| v.abs()).sum(),
            NormSpec::Linf => max_abs(x),
        }
    }

    /// `‖a‖` in the dual space, without input validation.
    pub fn eval_dual(&self, a: &[f64]) -> f64 {
        self.dual().eval(a)
    }

    /// Uniform sample from the closed unit ball (rejection from `[-1, 1]ⁿ`).
    pub fn sample_unit_ball<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if self.eval(&v) <= 1.0 {
                return v;
            }
        }
    }
}

impl fmt::Display for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormSpec::Euclidean => f.write_str("euclidean"),
            NormSpec::P(p) => write!(f, "p:{p:?}"),
            NormSpec::L1 => f.write_str("l1"),
            NormSpec::Linf => f.write_str("linf"),
        }
    }
}

impl FromStr for NormSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean" | "l2" => Ok(NormSpec::Euclidean),
            "l1" => Ok(NormSpec::L1),
            "linf" => Ok(NormSpec::Linf),
            other => {
                let p = other
                    .strip_prefix("p:")
                    .ok_or_else(|| Error::Parse(format!("unknown norm `{other}`")))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad p-norm exponent in `{other}`")))?;
                NormSpec::p(p)
            }
        }
    }
}

impl TryFrom<String> for NormSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NormSpec> for String {
    fn from(n: NormSpec) -> String {
        n.to_string()
    }
}

pub fn norm_value(x: &[f64], spec: NormSpec) -> Result<f64> {
    spec.validate()?;
    check_finite(x)?;
    Ok(spec.eval(x))
}

/// `‖a‖_*`, the norm of `spec.dual()`; equals `max_{‖h‖ ≤ 1} ⟨a, h⟩`.
pub fn dual_norm_value(a: &[f64], spec: NormSpec) -> Result<f64> {
    spec.validate()?;
    check_finite(a)?;
    Ok(spec.eval_dual(a))
}

/// The unique unit vector `j(a)` with `⟨a, j(a)⟩ = ‖a‖_*`.
pub fn dual_map(a: &[f64], spec: NormSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    check_finite(a)?;
    let m = max_abs(a);
    if m == 0.0 {
        return Err(Error::ZeroVector);
    }
    // j is 0-homogeneous, so work with a / ‖a‖_∞ to keep powers in range.
    let b: Vec<f64> = a.iter().map(|v| v / m).collect();
    match spec {
        NormSpec::Euclidean => {
            let n = NormSpec::Euclidean.eval(&b);
            Ok(b.iter().map(|v| v / n).collect())
        }
        NormSpec::P(p) => {
            let q = p / (p - 1.0);
            let nq = NormSpec::P(q).eval(&b).powf(q - 1.0);
            Ok(b.iter().map(|v| sign(*v) * v.abs().powf(q - 1.0) / nq).collect())
        }
        NormSpec::L1 | NormSpec::Linf => Err(Error::NonUniqueDualMap(spec.to_string())),
    }
}

/// Vertices of `argmax_{‖h‖ ≤ 1} ⟨a, h⟩`.
///
/// For strictly convex norms this is the singleton `{j(a)}`.
pub fn dual_face(a: &[f64], spec: NormSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    check_finite(a)?;
    let amax = max_abs(a);
    if amax == 0.0 {
        return Err(Error::ZeroVector);
    }
    match spec {
        NormSpec::Euclidean | NormSpec::P(_) => Ok(vec![dual_map(a, spec)?]),
        NormSpec::L1 => Ok(a
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() == amax)
            .map(|(i, v)| {
                let mut h = vec![0.0; a.len()];
                h[i] = sign(*v);
                h
            })
            .collect()),
        NormSpec::Linf => {
            let free: Vec<usize> = (0..a.len()).filter(|&i| a[i] == 0.0).collect();
            if free.len() >= 128 || (1u128 << free.len()) > FACE_VERTEX_LIMIT {
                return Err(Error::FaceTooLarge {
                    vertices: if free.len() >= 128 {
                        u128::MAX
                    } else {
                        1u128 << free.len()
                    },
                    limit: FACE_VERTEX_LIMIT,
                });
            }
            let base: Vec<f64> = a.iter().map(|v| sign(*v)).collect();
            Ok((0u64..(1u64 << free.len()))
                .map(|mask| {
                    let mut h = base.clone();
                    for (bit, &i) in free.iter().enumerate() {
                        h[i] = if mask >> bit & 1 == 0 { 1.0 } else { -1.0 };
                    }
                    h
                })
                .collect())
        }
    }
}

/// A dual vector `g` with `‖g‖_* = 1` and `⟨g, z⟩ = ‖z‖` (a subgradient of
/// the norm at `z ≠ 0`). Used for supporting half-spaces of norm balls.
pub(crate) fn norming_functional(z: &[f64], spec: NormSpec) -> Vec<f64> {
    match spec {
        NormSpec::L1 => z.iter().map(|v| sign(*v)).collect(),
        NormSpec::Linf => {
            let m = max_abs(z);
            let i = z.iter().position(|v| v.abs() == m).unwrap_or(0);
            let mut g = vec![0.0; z.len()];
            g[i] = sign(z[i]);
            g
        }
        NormSpec::Euclidean | NormSpec::P(_) => {
            dual_map(z, spec.dual()).unwrap_or_else(|_| vec![0.0; z.len()])
        }
    }
}

/// `|⟨a, h⟩ - ‖a‖_*|` — how far `h` is from attaining the dual norm.
pub fn pairing_residual(a: &[f64], h: &[f64], spec: NormSpec) -> f64 {
    (dot(a, h) - spec.eval_dual(a)).abs()
}
