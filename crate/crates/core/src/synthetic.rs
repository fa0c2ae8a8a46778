//! Seeded one-factor synthetic datasets: returns, caps and scores.
//!
//! r_{t,i} = β_i f_t + σ_i ε_{t,i} with f_t ~ N(μ_f, σ_f²) and ε ~ N(0, 1).
//! Idiosyncratic volatility can be tied to the score so that higher-score
//! assets are less risky, which plants a detectable variance effect.

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};

use crate::data::{CapPanel, ReturnPanel, ScoreVector};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_dates: usize,
    pub n_assets: usize,
    /// Assets with score exactly 0.
    pub n_zero_score: usize,
    pub seed: u64,
    pub factor_mean: f64,
    pub factor_sd: f64,
    /// Betas are drawn from U(1 − beta_spread, 1 + beta_spread).
    pub beta_spread: f64,
    /// Idiosyncratic volatility of a score-0 asset.
    pub idio_sd: f64,
    /// σ_i = idio_sd · exp(−idio_score_decay · score/100).
    pub idio_score_decay: f64,
    pub start: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_dates: 800,
            n_assets: 100,
            n_zero_score: 15,
            seed: 42,
            factor_mean: 0.0003,
            factor_sd: 0.01,
            beta_spread: 0.4,
            idio_sd: 0.015,
            idio_score_decay: 0.0,
            start: NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub returns: ReturnPanel,
    pub caps: CapPanel,
    pub scores: ScoreVector,
}

/// Consecutive weekdays starting at `start` (or the next weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_assets;
    let t = spec.n_dates;
    let assets: Vec<String> = (0..n).map(|i| format!("A{i:04}")).collect();

    let scores: Vec<f64> = (0..n)
        .map(|i| if i < spec.n_zero_score { 0.0 } else { (rng.gen_range(1.0..100.0_f64) * 100.0).round() / 100.0 })
        .collect();
    let betas: Vec<f64> = (0..n)
        .map(|_| if spec.beta_spread > 0.0 { rng.gen_range(1.0 - spec.beta_spread..1.0 + spec.beta_spread) } else { 1.0 })
        .collect();
    let idio: Vec<f64> =
        scores.iter().map(|s| spec.idio_sd * (-spec.idio_score_decay * s / 100.0).exp()).collect();

    let factor = Normal::new(spec.factor_mean, spec.factor_sd).expect("valid factor sd");
    let mut values = Array2::zeros((t, n));
    for mut row in values.rows_mut() {
        let f = factor.sample(&mut rng);
        for (i, r) in row.iter_mut().enumerate() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *r = betas[i] * f + idio[i] * e;
        }
    }

    let initial = LogNormal::new(23.0, 1.0).expect("valid lognormal");
    let mut caps = Array2::zeros((t, n));
    for i in 0..n {
        let mut c: f64 = initial.sample(&mut rng);
        for k in 0..t {
            c *= 1.0 + values[[k, i]].max(-0.5);
            caps[[k, i]] = c;
        }
    }

    let dates = business_days(spec.start, t);
    let returns = ReturnPanel::new(dates.clone(), assets.clone(), values).expect("generated panel is valid");
    let caps = CapPanel::new(dates, assets.clone(), caps, &returns).expect("generated caps are valid");
    let scores = ScoreVector::new(assets, scores).expect("generated scores are valid");
    SyntheticData { returns, caps, scores }
}
