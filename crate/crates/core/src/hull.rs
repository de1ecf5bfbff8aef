//! Finite convex-hull representations of set gradients `∂f(A)`.
//!
//! A [`HullSet`] is a finite list of dual vectors whose convex hull stands for
//! `∂f(A)`, either exactly (piecewise-affine oracles) or as an inner
//! approximation built from gradients sampled on a ball. Everything about
//! `f°(A; ·)` is read off the hull through its support function.

use std::fmt::Write as _;
use std::thread;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormSpec;
use crate::oracles::FunctionOracle;
use crate::region::{BallRegion, Region};
use crate::vector::{axpy, dot, fmt_f64, max_abs_diff, sub};

/// Points closer than this (max-norm) are merged.
pub const DEDUP_TOL: f64 = 1e-14;
/// Samples drawn per RNG substream; fixes the stream layout independently
/// of how many workers run.
pub const SAMPLE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled { m: usize, seed: u64 },
    Merged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHull")]
pub struct HullSet {
    points: Vec<Vec<f64>>,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct RawHull {
    points: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl TryFrom<RawHull> for HullSet {
    type Error = Error;

    fn try_from(raw: RawHull) -> Result<Self> {
        HullSet::new(raw.points, raw.provenance)
    }
}

impl HullSet {
    pub fn new(points: Vec<Vec<f64>>, provenance: Provenance) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Input("hull must contain at least one point".into()));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::Input("hull points must have positive dimension".into()));
        }
        let mut kept: Vec<Vec<f64>> = Vec::with_capacity(points.len());
        for p in points {
            check_dim(dim, p.len())?;
            check_finite(&p)?;
            if !kept.iter().any(|q| max_abs_diff(q, &p) <= DEDUP_TOL) {
                kept.push(p);
            }
        }
        Ok(Self { points: kept, provenance })
    }

    /// The exact hull `∂f(A)` from the oracle's piecewise-affine structure.
    pub fn exact(oracle: &dyn FunctionOracle, region: &Region) -> Result<Self> {
        check_dim(oracle.dim(), region.dim())?;
        Self::new(oracle.exact_subdiff(region)?, Provenance::Exact)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn is_exact(&self) -> bool {
        self.provenance == Provenance::Exact
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest dual norm over the points: a Lipschitz rank of `h ↦ f°(A; h)`.
    pub fn max_dual_norm(&self, norm: NormSpec) -> f64 {
        self.points
            .iter()
            .map(|p| norm.eval_dual(p))
            .fold(0.0, f64::max)
    }

    /// Largest pairwise Euclidean distance.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0_f64;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                d = d.max(NormSpec::Euclidean.eval(&sub(p, q)));
            }
        }
        d
    }

    pub fn translate(&self, t: &[f64]) -> Result<Self> {
        check_dim(self.dim(), t.len())?;
        Self::new(
            self.points.iter().map(|p| axpy(p, 1.0, t)).collect(),
            self.provenance,
        )
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(
            self.points
                .iter()
                .map(|p| p.iter().map(|v| c * v).collect())
                .collect(),
            self.provenance,
        )
    }

    /// One point per line, comma separated.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for p in &self.points {
            let row: Vec<String> = p.iter().map(|v| fmt_f64(*v)).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    /// Parse one point per line. Blank lines, `#` comments and a
    /// non-numeric header line are skipped.
    pub fn from_csv(text: &str, provenance: Provenance) -> Result<Self> {
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            match parsed {
                Ok(p) => points.push(p),
                Err(_) if points.is_empty() && lineno == 0 => continue,
                Err(e) => {
                    return Err(Error::Parse(format!("line {}: {e}", lineno + 1)));
                }
            }
        }
        Self::new(points, provenance)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `max_{a ∈ hull} ⟨a, h⟩`: equal to `f°(A; h)` for an exact hull and a
/// lower estimate of it for a sampled one.
pub fn support_value(hull: &HullSet, h: &[f64]) -> Result<f64> {
    check_dim(hull.dim(), h.len())?;
    Ok(support_unchecked(hull, h))
}

pub(crate) fn support_unchecked(hull: &HullSet, h: &[f64]) -> f64 {
    hull.points
        .iter()
        .map(|a| dot(a, h))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Gradients at the center and at `m` uniform points of the ball.
pub fn sample_ball_gradients(
    oracle: &dyn FunctionOracle,
    region: &BallRegion,
    m: usize,
    seed: u64,
) -> Result<HullSet> {
    sample_ball_gradients_par(oracle, region, m, seed, 1)
}

/// As [`sample_ball_gradients`], spread over `workers` threads. Chunk `c`
/// of [`SAMPLE_CHUNK`] samples always draws from substream `c` of `seed`,
/// so the result does not depend on `workers`.
pub fn sample_ball_gradients_par(
    oracle: &dyn FunctionOracle,
    region: &BallRegion,
    m: usize,
    seed: u64,
    workers: usize,
) -> Result<HullSet> {
    if m == 0 {
        return Err(Error::Input("sample count must be at least 1".into()));
    }
    check_dim(oracle.dim(), region.dim())?;
    let chunks = m.div_ceil(SAMPLE_CHUNK);
    let chunk_samples = |c: usize| -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let len = SAMPLE_CHUNK.min(m - c * SAMPLE_CHUNK);
        (0..len)
            .map(|_| oracle.gradient(&region.sample(&mut rng)))
            .collect()
    };

    let workers = workers.clamp(1, chunks);
    let per_chunk: Vec<Vec<Vec<f64>>> = if workers == 1 {
        (0..chunks).map(chunk_samples).collect()
    } else {
        let mut slots: Vec<Vec<Vec<f64>>> = vec![Vec::new(); chunks];
        thread::scope(|s| {
            for (w, part) in slots.chunks_mut(chunks.div_ceil(workers)).enumerate() {
                let first = w * chunks.div_ceil(workers);
                let chunk_samples = &chunk_samples;
                s.spawn(move || {
                    for (i, slot) in part.iter_mut().enumerate() {
                        *slot = chunk_samples(first + i);
                    }
                });
            }
        });
        slots
    };

    let mut points = Vec::with_capacity(m + 1);
    points.push(oracle.gradient(&region.center));
    points.extend(per_chunk.into_iter().flatten());
    HullSet::new(points, Provenance::Sampled { m, seed })
}

/// Monte-Carlo estimate of `sup_{y ∈ A} f°(y; h)` from difference quotients.
///
/// Probes are the region's anchors plus `probes` random points; each is
/// also jittered slightly. Biased low (finitely many probes) and, because
/// jittered points may leave `A`, occasionally high. A cross-check for
/// [`support_value`] only.
pub fn directional_derivative_fd_upper(
    oracle: &dyn FunctionOracle,
    region: &Region,
    h: &[f64],
    probes: usize,
    seed: u64,
) -> Result<f64> {
    if probes == 0 {
        return Err(Error::Input("probe count must be at least 1".into()));
    }
    check_dim(oracle.dim(), region.dim())?;
    check_dim(oracle.dim(), h.len())?;
    let hn = NormSpec::Euclidean.eval(h);
    if hn == 0.0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ys = region.anchors();
    ys.extend((0..probes).map(|_| region.sample(&mut rng)));
    let jitter = 1e-7 * (1.0 + region.extent());
    let mut best = f64::NEG_INFINITY;
    for y in ys {
        let w = NormSpec::Euclidean.sample_unit_ball(y.len(), &mut rng);
        for z in [y.clone(), axpy(&y, jitter, &w)] {
            let fz = oracle.value(&z);
            for t in [1e-4 / hn, 1e-6 / hn] {
                let q = (oracle.value(&axpy(&z, t, h)) - fz) / t;
                best = best.max(q);
            }
        }
    }
    Ok(best)
}

/// Hausdorff distance between finite point sets under `norm`.
pub fn hausdorff_distance(p: &[Vec<f64>], q: &[Vec<f64>], norm: NormSpec) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Input("Hausdorff distance of an empty set".into()));
    }
    let dim = p[0].len();
    for x in p.iter().chain(q) {
        check_dim(dim, x.len())?;
    }
    let excess = |a: &[Vec<f64>], b: &[Vec<f64>]| {
        a.iter()
            .map(|x| {
                b.iter()
                    .map(|y| norm.eval(&sub(x, y)))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(excess(p, q).max(excess(q, p)))
}

/// Deduplicated union of hulls.
pub fn merge(hulls: &[HullSet]) -> Result<HullSet> {
    let Some(first) = hulls.first() else {
        return Err(Error::Input("nothing to merge".into()));
    };
    let provenance = if hulls.iter().all(HullSet::is_exact) {
        Provenance::Exact
    } else if hulls.len() == 1 {
        first.provenance
    } else {
        Provenance::Merged
    };
    HullSet::new(
        hulls.iter().flat_map(|h| h.points.iter().cloned()).collect(),
        provenance,
    )
}
