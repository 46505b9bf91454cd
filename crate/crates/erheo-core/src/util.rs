//! Deterministic reductions and seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Pairwise (fixed binary tree) summation. The reduction order depends only on
/// the slice length, so results are bit-stable no matter how the values were
/// produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        let mut s = 0.0;
        for &x in v {
            s += x;
        }
        return s;
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Counter-based random stream: one master seed, one independent stream per
/// logical task. Trial `k` sees the same bytes whether the trials run on one
/// thread or sixteen.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Relative gap |a - b| / max(|a|, |b|, floor).
pub fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
