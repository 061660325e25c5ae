//! Deterministic inputs for the benchmarks.

use moveseq::skeleton::Point;
use moveseq::Pose;

/// A 25-joint body whose joints drift on slow sine paths.
pub fn pose(t: usize) -> Pose {
    let joints = (0..25)
        .map(|j| {
            let p = t as f64 * 0.05 + j as f64;
            Point::new(
                0.3 * (j % 5) as f64 - 0.6 + 0.02 * p.sin(),
                0.08 * j as f64 + 0.02 * p.cos(),
                2.0 + 0.01 * (0.7 * p).sin(),
            )
        })
        .collect();
    Pose::new(t, joints)
}

/// `n` feature frames of width `dim` with values in [-1, 1].
pub fn frames(n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|t| {
            (0..dim)
                .map(|i| ((t * dim + i) as f64 * 0.618).sin())
                .collect()
        })
        .collect()
}
