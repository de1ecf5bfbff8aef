//! Random hulls across norms, dimensions and sizes: the min-norm solvers
//! must certify every instance, and never lose to a single vertex.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setgrad::minnorm::{min_dual_norm_point, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use setgrad::{HullSet, NormSpec, Provenance};

#[test]
fn random_hulls_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let norms = [
        NormSpec::Euclidean,
        NormSpec::L1,
        NormSpec::Linf,
        NormSpec::P(1.2),
        NormSpec::P(1.5),
        NormSpec::P(3.0),
        NormSpec::P(6.0),
        NormSpec::P(10.0),
    ];
    let mut failures = Vec::new();
    for case in 0..1600 {
        let dim = rng.random_range(2..=6);
        let k = rng.random_range(1..=12);
        let pts: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let spec = norms[case % norms.len()];
        let h = HullSet::new(pts, Provenance::Exact).unwrap();
        match min_dual_norm_point(&h, spec, DEFAULT_TOL, DEFAULT_MAX_ITERS) {
            Ok(r) => {
                let best_vertex = h
                    .points()
                    .iter()
                    .map(|a| spec.eval_dual(a))
                    .fold(f64::INFINITY, f64::min);
                assert!(r.norm_value <= best_vertex + 1e-12, "case {case}: {r:?}");
            }
            Err(e) => failures.push(format!("case {case} ({spec}, {dim}-d, {k} points): {e}")),
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
