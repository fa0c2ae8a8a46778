//! Input generators shared by the benchmarks.

use ndarray::Array2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use scorebucket::CovarianceMatrix;

/// T × n window of i.i.d. normal daily returns.
pub fn return_window(t: usize, n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(0.0003, 0.015).expect("valid sd");
    Array2::from_shape_fn((t, n), |_| d.sample(&mut rng))
}

/// Sample covariance of a random `t × n` window.
pub fn covariance(t: usize, n: usize, seed: u64) -> CovarianceMatrix {
    scorebucket::estimate_covariance(return_window(t, n, seed).view(), 1e-8).expect("random window is estimable")
}

pub fn series(m: usize, mean: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, 0.01).expect("valid sd");
    (0..m).map(|_| d.sample(&mut rng)).collect()
}
