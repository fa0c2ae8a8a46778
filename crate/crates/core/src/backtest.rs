//! Rolling-window, one-day-hold out-of-sample engine.
//!
//! For each (bucket, strategy) pair and each 0-based day index `t` from
//! `ws − 1` to `T − 2`, weights are fitted on rows `t − ws + 1 ..= t` of the
//! bucket's columns and realized against row `t + 1`. This yields exactly
//! `M = T − ws` out-of-sample returns per pair.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use ndarray::{s, Array2, Axis};
use rayon::prelude::*;
use thiserror::Error;

use crate::bucketing::BucketAssignment;
use crate::data::{CapPanel, ReturnPanel};
use crate::optimizer::SolveStatus;
use crate::strategies::{strategy_weights, MvConfig, StrategyError, StrategyId};

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("window size {ws} must be at least 2 and below the number of dates {t}")]
    WindowTooLong { ws: usize, t: usize },
    #[error("return and cap panels are not aligned")]
    Misaligned,
    #[error("asset '{0}' in bucket assignment is not in the return panel")]
    UnknownAsset(String),
    #[error("no strategies configured")]
    NoStrategies,
    #[error("bucket {bucket}, strategy {strategy}, window ending {date}: {source}")]
    Pair {
        bucket: usize,
        strategy: StrategyId,
        date: NaiveDate,
        #[source]
        source: StrategyError,
    },
}

/// How days within a pair are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DayMode {
    /// Days in order, MV warm-started from the previous day's weights.
    #[default]
    Sequential,
    /// Days fitted independently in parallel with cold starts.
    Parallel,
}

#[derive(Debug, Clone)]
pub struct BacktestConfig {
    pub window_size: usize,
    pub strategies: Vec<StrategyId>,
    pub buckets: BucketAssignment,
    pub annualization: u32,
    pub mv: MvConfig,
    pub day_mode: DayMode,
}

/// Output of one (bucket, strategy) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub bucket_id: usize,
    pub strategy: StrategyId,
    pub assets: Vec<String>,
    /// Last in-window date for each fit (the weights' "as of" date).
    pub fit_dates: Vec<NaiveDate>,
    /// Realization date t+1 of each out-of-sample return.
    pub oos_dates: Vec<NaiveDate>,
    pub oos_returns: Vec<f64>,
    /// M × n weight path, one row per fit.
    pub weight_path: Array2<f64>,
    /// Days on which the MV solver hit its iteration cap.
    pub non_converged_days: usize,
    /// Days on which the covariance estimate needed a ridge.
    pub regularized_days: usize,
}

impl PairResult {
    pub fn m(&self) -> usize {
        self.oos_returns.len()
    }

    /// Writes the weight path as `date,<asset...>`, dated by fit date.
    pub fn write_weights_csv(&self, path: &std::path::Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["date".to_owned()];
        header.extend(self.assets.iter().cloned());
        w.write_record(&header)?;
        for (d, row) in self.fit_dates.iter().zip(self.weight_path.rows()) {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub window_size: usize,
    /// M = T − ws.
    pub m: usize,
    pub pairs: BTreeMap<(usize, StrategyId), PairResult>,
}

impl BacktestResult {
    pub fn get(&self, bucket: usize, strategy: StrategyId) -> Option<&PairResult> {
        self.pairs.get(&(bucket, strategy))
    }

    pub fn non_converged_days(&self) -> usize {
        self.pairs.values().map(|p| p.non_converged_days).sum()
    }
}

/// Runs every (bucket, strategy) pair. Empty buckets are skipped.
pub fn run_rolling_backtest(
    panel: &ReturnPanel,
    caps: &CapPanel,
    config: &BacktestConfig,
) -> Result<BacktestResult, BacktestError> {
    let t = panel.n_dates();
    let ws = config.window_size;
    if ws < 2 || ws >= t {
        return Err(BacktestError::WindowTooLong { ws, t });
    }
    if config.strategies.is_empty() {
        return Err(BacktestError::NoStrategies);
    }
    if caps.dates != panel.dates || caps.assets != panel.assets {
        return Err(BacktestError::Misaligned);
    }
    let index = panel.asset_index();
    let mut jobs = Vec::new();
    for bucket in config.buckets.buckets.iter().filter(|b| !b.is_empty()) {
        let cols = bucket
            .assets
            .iter()
            .map(|a| index.get(a.as_str()).copied().ok_or_else(|| BacktestError::UnknownAsset(a.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        for &strategy in &config.strategies {
            jobs.push((bucket.id, strategy, bucket.assets.clone(), cols.clone()));
        }
    }
    let results: Vec<PairResult> = jobs
        .into_par_iter()
        .map(|(bucket_id, strategy, assets, cols)| {
            run_pair(panel, caps, ws, bucket_id, strategy, assets, &cols, &config.mv, config.day_mode)
        })
        .collect::<Result<_, _>>()?;
    let pairs = results.into_iter().map(|p| ((p.bucket_id, p.strategy), p)).collect();
    Ok(BacktestResult { window_size: ws, m: t - ws, pairs })
}

struct DayFit {
    weights: Vec<f64>,
    non_converged: bool,
    regularized: bool,
}

#[allow(clippy::too_many_arguments)]
fn run_pair(
    panel: &ReturnPanel,
    caps: &CapPanel,
    ws: usize,
    bucket_id: usize,
    strategy: StrategyId,
    assets: Vec<String>,
    cols: &[usize],
    mv: &MvConfig,
    mode: DayMode,
) -> Result<PairResult, BacktestError> {
    let t_total = panel.n_dates();
    let returns = panel.values.select(Axis(1), cols);
    let cap_vals = caps.values.select(Axis(1), cols);
    let m = t_total - ws;
    let n = cols.len();

    let fit = |t: usize, warm: Option<&[f64]>| -> Result<DayFit, BacktestError> {
        let window = returns.slice(s![t + 1 - ws..=t, ..]);
        let out = strategy_weights(strategy, window, cap_vals.row(t), mv, warm).map_err(|source| {
            BacktestError::Pair { bucket: bucket_id, strategy, date: panel.dates[t], source }
        })?;
        let non_converged =
            out.diagnostics.as_ref().is_some_and(|d| d.status == SolveStatus::MaxIterations);
        if non_converged {
            log::warn!(
                "MV solver hit its iteration cap for bucket {bucket_id} on {}; using feasible weights",
                panel.dates[t]
            );
        }
        Ok(DayFit { weights: out.weights.into_vec(), non_converged, regularized: out.ridge > 0.0 })
    };

    let fits: Vec<DayFit> = match mode {
        DayMode::Parallel => {
            (ws - 1..t_total - 1).into_par_iter().map(|t| fit(t, None)).collect::<Result<_, _>>()?
        }
        DayMode::Sequential => {
            let mut out: Vec<DayFit> = Vec::with_capacity(m);
            for t in ws - 1..t_total - 1 {
                let warm = out.last().map(|f| f.weights.as_slice());
                let f = fit(t, warm)?;
                out.push(f);
            }
            out
        }
    };

    let mut weight_path = Array2::zeros((m, n));
    let mut oos_returns = Vec::with_capacity(m);
    let mut non_converged_days = 0;
    let mut regularized_days = 0;
    for (i, f) in fits.iter().enumerate() {
        let next = returns.row(ws + i);
        oos_returns.push(f.weights.iter().zip(next).map(|(w, r)| w * r).sum());
        weight_path.row_mut(i).assign(&ndarray::ArrayView1::from(&f.weights[..]));
        non_converged_days += f.non_converged as usize;
        regularized_days += f.regularized as usize;
    }
    Ok(PairResult {
        bucket_id,
        strategy,
        assets,
        fit_dates: panel.dates[ws - 1..t_total - 1].to_vec(),
        oos_dates: panel.dates[ws..].to_vec(),
        oos_returns,
        weight_path,
        non_converged_days,
        regularized_days,
    })
}
