//! Out-of-sample performance measures of a daily return series.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty series")]
    EmptySeries,
    #[error("series too short: need {needed}, have {actual}")]
    TooShort { needed: usize, actual: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("return {value} at position {index} is a total loss")]
    TotalLoss { index: usize, value: f64 },
    #[error("annualization factor must be at least 1")]
    BadAnnualization,
}

/// Minimum series length for the empirical 5% quantile.
pub const VAR95_MIN_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerformanceReport {
    pub m: usize,
    pub mean_daily: f64,
    pub variance_daily: f64,
    pub mean_annualized: f64,
    pub variance_annualized: f64,
    pub sd_annualized: f64,
    /// Daily mean over daily standard deviation; `None` for a zero-variance series.
    pub sharpe_daily: Option<f64>,
    /// Empirical 5th percentile of daily returns.
    pub var95: f64,
}

pub fn oos_mean(series: &[f64]) -> Result<f64, MetricsError> {
    if series.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

/// Sample variance with denominator M − 1 around [`oos_mean`].
pub fn oos_variance(series: &[f64]) -> Result<f64, MetricsError> {
    if series.len() < 2 {
        return Err(MetricsError::TooShort { needed: 2, actual: series.len() });
    }
    let mean = oos_mean(series)?;
    let ss: f64 = series.iter().map(|r| (r - mean) * (r - mean)).sum();
    Ok(ss / (series.len() - 1) as f64)
}

/// Daily Sharpe ratio with a zero risk-free rate.
pub fn sharpe(series: &[f64]) -> Result<f64, MetricsError> {
    let var = oos_variance(series)?;
    if !(var > 0.0) {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(oos_mean(series)? / var.sqrt())
}

/// Empirical 5% quantile, interpolating linearly between order statistics at
/// 1-based position h = (M − 1)·0.05 + 1.
pub fn var95(series: &[f64]) -> Result<f64, MetricsError> {
    quantile(series, 0.05, VAR95_MIN_LEN)
}

fn quantile(series: &[f64], p: f64, min_len: usize) -> Result<f64, MetricsError> {
    if series.len() < min_len {
        return Err(MetricsError::TooShort { needed: min_len, actual: series.len() });
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

/// Scales daily mean and variance by the annualization factor `a`.
pub fn annualize(mean_daily: f64, variance_daily: f64, a: u32) -> Result<(f64, f64), MetricsError> {
    if a == 0 {
        return Err(MetricsError::BadAnnualization);
    }
    let a = a as f64;
    Ok((a * mean_daily, a * variance_daily))
}

/// Cumulative wealth of 1.0 invested at the start: ∏(1 + rₜ), length M.
pub fn wealth_curve(series: &[f64]) -> Result<Vec<f64>, MetricsError> {
    let mut out = Vec::with_capacity(series.len());
    let mut w = 1.0;
    for (index, &r) in series.iter().enumerate() {
        if r <= -1.0 {
            return Err(MetricsError::TotalLoss { index, value: r });
        }
        w *= 1.0 + r;
        out.push(w);
    }
    Ok(out)
}

impl PerformanceReport {
    pub fn from_series(series: &[f64], annualization: u32) -> Result<Self, MetricsError> {
        let mean_daily = oos_mean(series)?;
        let variance_daily = oos_variance(series)?;
        let (mean_annualized, variance_annualized) = annualize(mean_daily, variance_daily, annualization)?;
        let sharpe_daily = match sharpe(series) {
            Ok(s) => Some(s),
            Err(MetricsError::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            m: series.len(),
            mean_daily,
            variance_daily,
            mean_annualized,
            variance_annualized,
            sd_annualized: variance_annualized.sqrt(),
            sharpe_daily,
            var95: var95(series)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_examples() {
        assert_eq!(oos_mean(&[0.01, -0.01]).unwrap(), 0.0);
        assert!((oos_mean(&[0.02, 0.02, 0.02]).unwrap() - 0.02).abs() < 1e-18);
        assert_eq!(oos_mean(&[]), Err(MetricsError::EmptySeries));
    }

    #[test]
    fn variance_examples() {
        assert!((oos_variance(&[0.01, -0.01]).unwrap() - 0.0002).abs() < 1e-18);
        assert_eq!(oos_variance(&[0.3; 5]).unwrap(), 0.0);
        assert!(matches!(oos_variance(&[0.1]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn sharpe_examples() {
        let s = [0.01, -0.01, 0.03, 0.01];
        // mean 0.01; deviations 0, −0.02, 0.02, 0 → variance 0.0008/3
        let expected = 0.01 / (0.0008f64 / 3.0).sqrt();
        assert!((sharpe(&s).unwrap() - expected).abs() < 1e-12);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert!((sharpe(&neg).unwrap() + expected).abs() < 1e-12);
        assert_eq!(sharpe(&[0.01; 4]), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn var95_constant_and_shift() {
        assert_eq!(var95(&[-0.02; 20]).unwrap(), -0.02);
        assert!(matches!(var95(&[0.0; 19]), Err(MetricsError::TooShort { .. })));
    }

    #[test]
    fn var95_two_losses_in_zeros() {
        let mut s = vec![-0.10, -0.05];
        s.extend(std::iter::repeat_n(0.0, 100));
        // M = 102, position (101)(0.05) = 5.05 → between sorted[5] and sorted[6], both 0
        assert_eq!(var95(&s).unwrap(), 0.0);
        let mut s2 = vec![-0.10, -0.05, -0.04, -0.03, -0.02, -0.01, -0.005];
        s2.extend(std::iter::repeat_n(0.0, 95));
        // sorted[5] = −0.01, sorted[6] = −0.005 → −0.01 + 0.05·0.005
        assert!((var95(&s2).unwrap() - (-0.01 + 0.05 * 0.005)).abs() < 1e-15);
    }

    #[test]
    fn annualize_examples() {
        let (m, v) = annualize(0.001, 2e-6, 252).unwrap();
        assert!((m - 0.252).abs() < 1e-15);
        assert!((v - 5.04e-4).abs() < 1e-18);
        assert_eq!(annualize(0.3, 0.2, 1).unwrap(), (0.3, 0.2));
    }

    #[test]
    fn wealth_examples() {
        let w = wealth_curve(&[0.1, 0.1]).unwrap();
        assert!((w[0] - 1.1).abs() < 1e-15 && (w[1] - 1.21).abs() < 1e-15);
        assert_eq!(wealth_curve(&[0.0; 3]).unwrap(), vec![1.0; 3]);
        assert!(matches!(wealth_curve(&[0.1, -1.0]), Err(MetricsError::TotalLoss { index: 1, .. })));
    }

    #[test]
    fn report_fields() {
        let s: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 * 0.002 - 0.006).collect();
        let r = PerformanceReport::from_series(&s, 252).unwrap();
        assert_eq!(r.m, 40);
        assert!((r.sd_annualized - r.variance_annualized.sqrt()).abs() < 1e-18);
        assert!(r.var95 <= quantile(&s, 0.5, 1).unwrap());
        assert_eq!(r.sharpe_daily.unwrap().signum(), r.mean_daily.signum());
    }
}
