//! Cross-asset summary statistics of a return panel and of the score cross-section.

use ndarray::ArrayView1;
use thiserror::Error;

use crate::data::{ReturnPanel, ScoreVector};

pub const DEFAULT_ANNUALIZATION: u32 = 252;

#[derive(Debug, Error, PartialEq)]
pub enum DescriptivesError {
    #[error("need at least 4 observations, found {0}")]
    TooShort(usize),
    #[error("annualization factor must be positive")]
    BadAnnualization,
}

/// Moment statistics of a single series. Skewness and kurtosis are `None`
/// when the series has zero dispersion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesMoments {
    pub mean: f64,
    pub sd: f64,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

/// Cross-asset averages of per-asset statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDescriptives {
    pub n_dates: usize,
    pub n_assets: usize,
    pub mean_annualized: f64,
    pub sd_annualized: f64,
    /// Average over assets with a defined value; `None` if no asset has one.
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

/// Sample mean, sample standard deviation (n−1) and the moment-ratio
/// skewness m3/m2^1.5 and excess kurtosis m4/m2² − 3.
pub fn series_moments(x: ArrayView1<'_, f64>) -> SeriesMoments {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = if x.len() > 1 { (m2 / (n - 1.0)).sqrt() } else { 0.0 };
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 > 0.0 {
        SeriesMoments {
            mean,
            sd,
            skewness: Some(m3 / m2.powf(1.5)),
            excess_kurtosis: Some(m4 / (m2 * m2) - 3.0),
        }
    } else {
        SeriesMoments { mean, sd, skewness: None, excess_kurtosis: None }
    }
}

fn mean_of_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, count) = values.flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

pub fn compute_descriptives(
    panel: &ReturnPanel,
    annualization: u32,
) -> Result<PanelDescriptives, DescriptivesError> {
    if annualization == 0 {
        return Err(DescriptivesError::BadAnnualization);
    }
    let t = panel.n_dates();
    if t < 4 {
        return Err(DescriptivesError::TooShort(t));
    }
    let a = annualization as f64;
    let per_asset: Vec<SeriesMoments> = panel.values.columns().into_iter().map(series_moments).collect();
    let n = per_asset.len() as f64;
    Ok(PanelDescriptives {
        n_dates: t,
        n_assets: panel.n_assets(),
        mean_annualized: per_asset.iter().map(|m| m.mean * a).sum::<f64>() / n,
        sd_annualized: per_asset.iter().map(|m| m.sd * a.sqrt()).sum::<f64>() / n,
        skewness: mean_of_defined(per_asset.iter().map(|m| m.skewness)),
        excess_kurtosis: mean_of_defined(per_asset.iter().map(|m| m.excess_kurtosis)),
    })
}

/// Moments of the score cross-section itself.
pub fn score_descriptives(scores: &ScoreVector) -> SeriesMoments {
    series_moments(ArrayView1::from(&scores.scores[..]))
}
