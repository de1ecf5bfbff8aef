//! Compact regions `A ⊂ ℝⁿ` on which set gradients are taken.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::norms::NormSpec;
use crate::vector::{axpy, sub};

/// Closed ball `B̄ε(x)` under `norm`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallRegion {
    pub center: Vec<f64>,
    pub radius: f64,
    pub norm: NormSpec,
}

impl BallRegion {
    pub fn new(center: Vec<f64>, radius: f64, norm: NormSpec) -> Result<Self> {
        check_finite(&center)?;
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::Input(format!("ball radius must be finite and >= 0, got {radius}")));
        }
        norm.validate()?;
        Ok(Self { center, radius, norm })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        if self.radius == 0.0 {
            return self.center.clone();
        }
        let u = self.norm.sample_unit_ball(self.dim(), rng);
        axpy(&self.center, self.radius, &u)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.norm.eval(&sub(y, &self.center)) <= self.radius
    }
}

/// A compact region: a norm ball, a closed segment `[start, end]`, or an
/// axis-aligned box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball(BallRegion),
    Segment { start: Vec<f64>, end: Vec<f64> },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl From<BallRegion> for Region {
    fn from(b: BallRegion) -> Self {
        Region::Ball(b)
    }
}

impl Region {
    pub fn ball(center: Vec<f64>, radius: f64, norm: NormSpec) -> Result<Self> {
        BallRegion::new(center, radius, norm).map(Region::Ball)
    }

    pub fn point(x: Vec<f64>) -> Result<Self> {
        Self::ball(x, 0.0, NormSpec::Euclidean)
    }

    pub fn segment(start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        check_dim(start.len(), end.len())?;
        check_finite(&start)?;
        check_finite(&end)?;
        Ok(Region::Segment { start, end })
    }

    pub fn bounding_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        check_finite(&lo)?;
        check_finite(&hi)?;
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(Error::Input("box requires lo <= hi componentwise".into()));
        }
        Ok(Region::Box { lo, hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Ball(b) => b.dim(),
            Region::Segment { start, .. } => start.len(),
            Region::Box { lo, .. } => lo.len(),
        }
    }

    /// A representative interior point (ball center, segment midpoint, box center).
    pub fn center(&self) -> Vec<f64> {
        match self {
            Region::Ball(b) => b.center.clone(),
            Region::Segment { start, end } => {
                start.iter().zip(end).map(|(a, b)| 0.5 * (a + b)).collect()
            }
            Region::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
        }
    }

    /// Uniform sample from the region.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Region::Ball(b) => b.sample(rng),
            Region::Segment { start, end } => {
                let s: f64 = rng.random_range(0.0..=1.0);
                start.iter().zip(end).map(|(a, b)| a + s * (b - a)).collect()
            }
            Region::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| if l < h { rng.random_range(l..=h) } else { l })
                .collect(),
        }
    }

    /// Deterministic extreme points worth probing: endpoints or corners
    /// (boxes only up to 10 dimensions), plus the center.
    pub fn anchors(&self) -> Vec<Vec<f64>> {
        let mut out = vec![self.center()];
        match self {
            Region::Ball(_) => {}
            Region::Segment { start, end } => {
                out.push(start.clone());
                out.push(end.clone());
            }
            Region::Box { lo, hi } => {
                if lo.len() <= 10 {
                    for mask in 0u32..(1 << lo.len()) {
                        out.push(
                            (0..lo.len())
                                .map(|i| if mask >> i & 1 == 0 { lo[i] } else { hi[i] })
                                .collect(),
                        );
                    }
                }
            }
        }
        out
    }

    /// Largest distance from the center to a region point in `norm`;
    /// used to scale numerical tolerances.
    pub fn extent(&self) -> f64 {
        match self {
            Region::Ball(b) => b.radius,
            Region::Segment { start, end } => 0.5 * NormSpec::Euclidean.eval(&sub(end, start)),
            Region::Box { lo, hi } => 0.5 * NormSpec::Euclidean.eval(&sub(hi, lo)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for norm in [NormSpec::Euclidean, NormSpec::P(3.0), NormSpec::L1, NormSpec::Linf] {
            let b = BallRegion::new(vec![1.0, -2.0, 0.5], 0.3, norm).unwrap();
            for _ in 0..1000 {
                assert!(b.contains(&b.sample(&mut rng)));
            }
        }
        let seg = Region::segment(vec![0.0], vec![1.0]).unwrap();
        for _ in 0..100 {
            let y = seg.sample(&mut rng);
            assert!((0.0..=1.0).contains(&y[0]));
        }
    }

    #[test]
    fn degenerate_ball_is_its_center() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = BallRegion::new(vec![0.25, 4.0], 0.0, NormSpec::L1).unwrap();
        assert_eq!(b.sample(&mut rng), vec![0.25, 4.0]);
    }

    #[test]
    fn rejects_bad_regions() {
        assert!(BallRegion::new(vec![0.0], -1.0, NormSpec::Euclidean).is_err());
        assert!(BallRegion::new(vec![f64::NAN], 1.0, NormSpec::Euclidean).is_err());
        assert!(Region::segment(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(Region::bounding_box(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn box_anchors_are_corners() {
        let r = Region::bounding_box(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let a = r.anchors();
        assert_eq!(a.len(), 5);
        assert!(a.contains(&vec![1.0, 2.0]));
        assert!(a.contains(&vec![0.0, 2.0]));
    }
}
