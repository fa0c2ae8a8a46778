//! Pairwise tests for equal Sharpe ratios and equal variances of two
//! out-of-sample return series observed on the same days.
//!
//! Both tests are studentized circular block bootstraps on a smooth function
//! of the joint first and second moments y_t = (a_t, b_t, a_t², b_t²):
//!
//! * Sharpe: Δ = μa/σa − μb/σb
//! * variance: Δ = log σa² − log σb²
//!
//! with σ² = E[x²] − μ². The standard error of Δ on the original sample is a
//! delta-method HAC estimate with Bartlett weights and bandwidth equal to the
//! block length. On each resample it is the block-sum estimate over the
//! resampled blocks, which is the natural bootstrap counterpart. The two-sided
//! p-value is
//!
//! ```text
//!     p = (1 + #{ |Δ* − Δ| / se* ≥ |Δ| / se }) / (B + 1).
//! ```
//!
//! Resample `i` draws its block starts from a ChaCha stream keyed by
//! `(seed, i)`, so results do not depend on thread count or scheduling.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub const DEFAULT_BLOCK_LENGTH: usize = 5;
pub const DEFAULT_RESAMPLES: usize = 4999;
pub const MIN_SERIES_LEN: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series too short: need at least {MIN_SERIES_LEN}, have {0}")]
    TooShort(usize),
    #[error("a series has zero variance")]
    ZeroVariance,
    #[error("invalid test parameters: {0}")]
    BadParams(String),
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    SharpeDiff,
    VarianceDiff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Stars {
    #[default]
    None,
    One,
    Two,
    Three,
}

impl fmt::Display for Stars {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        })
    }
}

/// `***` for p ≤ 0.01, `**` for p ≤ 0.05, `*` for p ≤ 0.10.
pub fn star_annotation(p: f64) -> Result<Stars, InferenceError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(InferenceError::OutOfRange(p));
    }
    Ok(if p <= 0.01 {
        Stars::Three
    } else if p <= 0.05 {
        Stars::Two
    } else if p <= 0.10 {
        Stars::One
    } else {
        Stars::None
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestParams {
    pub block_length: usize,
    pub resamples: usize,
    pub seed: u64,
}

impl TestParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { block_length: DEFAULT_BLOCK_LENGTH, resamples: DEFAULT_RESAMPLES, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub kind: TestKind,
    /// Point estimate Δ.
    pub difference: f64,
    /// Studentized statistic Δ / se.
    pub statistic: f64,
    pub p_value: f64,
    pub stars: Stars,
    pub block_length: usize,
    pub resamples: usize,
    pub seed: u64,
}

pub fn sharpe_diff_test(a: &[f64], b: &[f64], params: &TestParams) -> Result<TestResult, InferenceError> {
    run_test(TestKind::SharpeDiff, a, b, params)
}

pub fn variance_diff_test(a: &[f64], b: &[f64], params: &TestParams) -> Result<TestResult, InferenceError> {
    run_test(TestKind::VarianceDiff, a, b, params)
}

/// Moment vector (μa, μb, γa, γb) with γ = E[x²].
type Moments = [f64; 4];

fn moments_of(a: &[f64], b: &[f64], idx: impl Iterator<Item = usize>) -> Moments {
    let mut m = [0.0; 4];
    let mut n = 0usize;
    for t in idx {
        let (x, y) = (a[t], b[t]);
        m[0] += x;
        m[1] += y;
        m[2] += x * x;
        m[3] += y * y;
        n += 1;
    }
    let n = n as f64;
    m.map(|v| v / n)
}

/// Δ and its gradient with respect to the moment vector.
fn statistic_and_gradient(kind: TestKind, m: &Moments) -> (f64, Moments) {
    let va = m[2] - m[0] * m[0];
    let vb = m[3] - m[1] * m[1];
    match kind {
        TestKind::SharpeDiff => {
            let (sa, sb) = (va.sqrt(), vb.sqrt());
            let delta = m[0] / sa - m[1] / sb;
            let (ca, cb) = (va * sa, vb * sb);
            let grad = [m[2] / ca, -m[3] / cb, -m[0] / (2.0 * ca), m[1] / (2.0 * cb)];
            (delta, grad)
        }
        TestKind::VarianceDiff => {
            let delta = va.ln() - vb.ln();
            let grad = [-2.0 * m[0] / va, 2.0 * m[1] / vb, 1.0 / va, -1.0 / vb];
            (delta, grad)
        }
    }
}

#[inline]
fn influence(a: f64, b: f64, m: &Moments, g: &Moments) -> f64 {
    // grouped per series so that swapping (a, b) negates the result exactly
    let za = g[0] * (a - m[0]) + g[2] * (a * a - m[2]);
    let zb = g[1] * (b - m[1]) + g[3] * (b * b - m[3]);
    za + zb
}

/// Bartlett-weighted long-run variance of z with lag truncation `bandwidth`,
/// divided by the sample size: the HAC variance of the mean of z.
fn hac_variance_of_mean(z: &[f64], bandwidth: usize) -> f64 {
    let n = z.len();
    let gamma = |k: usize| z[k..].iter().zip(z).map(|(x, y)| x * y).sum::<f64>() / n as f64;
    let mut lrv = gamma(0);
    for k in 1..=bandwidth.min(n - 1) {
        let w = 1.0 - k as f64 / (bandwidth as f64 + 1.0);
        lrv += 2.0 * w * gamma(k);
    }
    lrv.max(0.0) / n as f64
}

fn run_test(kind: TestKind, a: &[f64], b: &[f64], params: &TestParams) -> Result<TestResult, InferenceError> {
    if a.len() != b.len() {
        return Err(InferenceError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < MIN_SERIES_LEN {
        return Err(InferenceError::TooShort(n));
    }
    if params.block_length == 0 || params.block_length > n {
        return Err(InferenceError::BadParams(format!("block length {} for {n} observations", params.block_length)));
    }
    if params.resamples == 0 {
        return Err(InferenceError::BadParams("need at least one resample".into()));
    }
    let m = moments_of(a, b, 0..n);
    if !(m[2] - m[0] * m[0] > 0.0) || !(m[3] - m[1] * m[1] > 0.0) {
        return Err(InferenceError::ZeroVariance);
    }
    let (delta, grad) = statistic_and_gradient(kind, &m);
    let z: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| influence(x, y, &m, &grad)).collect();
    let se = hac_variance_of_mean(&z, params.block_length).sqrt();

    let finish = |statistic: f64, p_value: f64| TestResult {
        kind,
        difference: delta,
        statistic,
        p_value,
        stars: star_annotation(p_value).unwrap_or_default(),
        block_length: params.block_length,
        resamples: params.resamples,
        seed: params.seed,
    };
    if delta == 0.0 {
        return Ok(finish(0.0, 1.0));
    }
    let observed = if se > 0.0 { delta.abs() / se } else { f64::INFINITY };

    let exceed: usize = (0..params.resamples)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |idx, r| {
                fill_circular_blocks(idx, n, params.block_length, params.seed, r as u64);
                let (d_star, se_star) = resample_stat(kind, a, b, idx, params.block_length);
                let dev = (d_star - delta).abs();
                let t_star = if se_star > 0.0 {
                    dev / se_star
                } else if dev > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                usize::from(t_star >= observed)
            },
        )
        .sum();
    let p_value = (1 + exceed) as f64 / (params.resamples + 1) as f64;
    let statistic = if se > 0.0 { delta / se } else { delta.signum() * f64::INFINITY };
    Ok(finish(statistic, p_value))
}

/// Circular block resample indices for resample number `stream`.
fn fill_circular_blocks(idx: &mut Vec<usize>, n: usize, block: usize, seed: u64, stream: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    idx.clear();
    while idx.len() < n {
        let start = rng.gen_range(0..n);
        let take = block.min(n - idx.len());
        idx.extend((start..start + take).map(|t| if t >= n { t - n } else { t }));
    }
}

fn resample_stat(kind: TestKind, a: &[f64], b: &[f64], idx: &[usize], block: usize) -> (f64, f64) {
    let n = idx.len();
    let m = moments_of(a, b, idx.iter().copied());
    let va = m[2] - m[0] * m[0];
    let vb = m[3] - m[1] * m[1];
    if !(va > 0.0 && vb > 0.0) {
        return (f64::NAN, 0.0);
    }
    let (d, g) = statistic_and_gradient(kind, &m);
    let mut sum_sq = 0.0;
    for chunk in idx.chunks(block) {
        let s: f64 = chunk.iter().map(|&t| influence(a[t], b[t], &m, &g)).sum();
        sum_sq += s * s;
    }
    (d, sum_sq.sqrt() / n as f64)
}
