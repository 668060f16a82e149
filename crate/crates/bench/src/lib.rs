//! Shared inputs for the benchmarks.

use cba_core::bases::{ball_orders, euclidean_metric, BallOrder, NestedFamily};
use cba_core::contextual::{tune_balls, Tuning};
use cba_core::rng::stream;
use rand::Rng;

/// Ball families over `n` uniform points in the unit square, with the tuning
/// for `k` actions over `horizon` trials.
pub fn unit_square_balls(n: usize, k: usize, horizon: u64) -> (Vec<NestedFamily>, Tuning) {
    let mut rng = stream(n as u64, 0);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
        .collect();
    let metric = euclidean_metric(&points).expect("points share a dimension");
    let families: Vec<NestedFamily> = ball_orders(&metric).iter().map(BallOrder::family).collect();
    let n_sets = families.iter().map(NestedFamily::len).sum();
    let tuning = tune_balls(n, n_sets, 2, k, horizon).expect("valid tuning inputs");
    (families, tuning)
}
