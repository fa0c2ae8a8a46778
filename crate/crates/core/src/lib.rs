//! Score-bucketed portfolio backtesting.
//!
//! Assets are split into a zero-score bucket plus `k` equal-probability score
//! buckets. Each bucket is run through minimum-variance, equally-weighted and
//! market-cap-weighted strategies in a rolling-window, one-day-hold
//! out-of-sample backtest, and every bucket is compared against the
//! zero-score bucket with block-bootstrap tests on variance and Sharpe ratio.

// NaN must fail validity checks, so `!(x > 0.0)` is used on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod bucketing;
pub mod config;
pub mod covariance;
pub mod data;
pub mod descriptives;
pub mod inference;
mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod pipeline;
pub mod report;
pub mod strategies;
pub mod synthetic;

use thiserror::Error;

pub use backtest::{run_rolling_backtest, BacktestConfig, BacktestError, BacktestResult, DayMode, PairResult};
pub use bucketing::{assign_buckets, bucket_sizes, Bucket, BucketAssignment, BucketError};
pub use config::{ConfigError, RunConfig};
pub use covariance::{estimate_covariance, CovarianceError, CovarianceMatrix};
pub use data::{load_cap_panel, load_return_panel, load_scores, CapPanel, DataError, ReturnPanel, ScoreVector};
pub use descriptives::{compute_descriptives, PanelDescriptives};
pub use inference::{sharpe_diff_test, star_annotation, variance_diff_test, Stars, TestKind, TestParams, TestResult};
pub use metrics::{oos_mean, oos_variance, sharpe, var95, wealth_curve, PerformanceReport};
pub use optimizer::{solve_min_variance, SolveDiagnostics, SolveStatus, SolverConfig, WeightVector};
pub use report::{ResultRow, ResultTable};
pub use strategies::{ew_weights, mc_weights, strategy_weights, MvConfig, StrategyId};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Descriptives(#[from] descriptives::DescriptivesError),
    #[error(transparent)]
    Bucket(#[from] BucketError),
    #[error(transparent)]
    Backtest(#[from] BacktestError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use report::ReportError as R;
        match self {
            Error::Config(_) => 2,
            Error::Backtest(BacktestError::WindowTooLong { .. } | BacktestError::NoStrategies) => 2,
            Error::Backtest(BacktestError::Pair { .. }) => 4,
            Error::Backtest(_) => 3,
            Error::Report(R::Metrics { .. } | R::Inference { .. }) => 4,
            Error::Data(_) | Error::Descriptives(_) | Error::Bucket(_) | Error::Report(_) | Error::Io { .. } => 3,
        }
    }
}
