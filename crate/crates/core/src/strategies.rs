//! Weight rules for the three portfolio strategies.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView1, ArrayView2};
use thiserror::Error;

use crate::covariance::{estimate_covariance, CovarianceError};
use crate::optimizer::{self, OptimizeError, SolveDiagnostics, SolverConfig, WeightVector};

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("market cap {value} at position {index} is not strictly positive")]
    NonPositiveCap { index: usize, value: f64 },
    #[error("empty asset set")]
    Empty,
    #[error("dimension mismatch: window has {window} assets, caps row has {caps}")]
    DimensionMismatch { window: usize, caps: usize },
    #[error(transparent)]
    Covariance(#[from] CovarianceError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error("unknown strategy '{0}' (expected MV, EW or MC)")]
    Unknown(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyId {
    MinimumVariance,
    EquallyWeighted,
    MarketCapWeighted,
}

impl StrategyId {
    pub const ALL: [StrategyId; 3] =
        [StrategyId::MinimumVariance, StrategyId::EquallyWeighted, StrategyId::MarketCapWeighted];

    pub fn code(self) -> &'static str {
        match self {
            StrategyId::MinimumVariance => "MV",
            StrategyId::EquallyWeighted => "EW",
            StrategyId::MarketCapWeighted => "MC",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for StrategyId {
    type Err = StrategyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MV" | "MINIMUMVARIANCE" | "MIN_VARIANCE" => Ok(StrategyId::MinimumVariance),
            "EW" | "EQUALLYWEIGHTED" | "EQUAL" => Ok(StrategyId::EquallyWeighted),
            "MC" | "MARKETCAPWEIGHTED" | "CAP" => Ok(StrategyId::MarketCapWeighted),
            _ => Err(StrategyError::Unknown(s.to_owned())),
        }
    }
}

/// Settings for the minimum-variance route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvConfig {
    pub solver: SolverConfig,
    pub ridge_scale: f64,
}

impl Default for MvConfig {
    fn default() -> Self {
        Self { solver: SolverConfig::default(), ridge_scale: crate::covariance::DEFAULT_RIDGE_SCALE }
    }
}

pub fn ew_weights(n: usize) -> Result<WeightVector, StrategyError> {
    if n == 0 {
        return Err(StrategyError::Empty);
    }
    Ok(WeightVector::from_raw(vec![1.0 / n as f64; n]))
}

pub fn mc_weights(caps: ArrayView1<'_, f64>) -> Result<WeightVector, StrategyError> {
    if caps.is_empty() {
        return Err(StrategyError::Empty);
    }
    for (index, &value) in caps.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(StrategyError::NonPositiveCap { index, value });
        }
    }
    let total: f64 = caps.sum();
    Ok(WeightVector::from_raw(caps.iter().map(|c| c / total).collect()))
}

/// Weights plus, for MV, the solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyWeights {
    pub weights: WeightVector,
    pub diagnostics: Option<SolveDiagnostics>,
    /// Ridge added to the covariance estimate (MV only).
    pub ridge: f64,
}

/// Dispatches to the strategy's weight rule.
///
/// `window` holds the look-back returns (rows = days) and `caps` the market
/// caps on the last in-window day, both restricted to the same assets. An MV
/// solve that hits the iteration cap still returns its feasible weights; the
/// caller inspects `diagnostics.status`.
pub fn strategy_weights(
    id: StrategyId,
    window: ArrayView2<'_, f64>,
    caps: ArrayView1<'_, f64>,
    mv: &MvConfig,
    warm_start: Option<&[f64]>,
) -> Result<StrategyWeights, StrategyError> {
    let n = window.ncols();
    match id {
        StrategyId::EquallyWeighted => {
            Ok(StrategyWeights { weights: ew_weights(n)?, diagnostics: None, ridge: 0.0 })
        }
        StrategyId::MarketCapWeighted => {
            if caps.len() != n {
                return Err(StrategyError::DimensionMismatch { window: n, caps: caps.len() });
            }
            Ok(StrategyWeights { weights: mc_weights(caps)?, diagnostics: None, ridge: 0.0 })
        }
        StrategyId::MinimumVariance => {
            let sigma = estimate_covariance(window, mv.ridge_scale)?;
            let sol = optimizer::solve(&sigma, &mv.solver, warm_start);
            Ok(StrategyWeights {
                weights: sol.weights,
                diagnostics: Some(sol.diagnostics),
                ridge: sigma.regularization(),
            })
        }
    }
}
