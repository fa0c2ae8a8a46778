//! End-to-end orchestration: ingest → bucket → backtest → tests → report.
//!
//! Each stage reads and writes files in the output directory so the CLI can
//! run stages separately; [`run_pipeline`] runs them all in memory and writes
//! the same files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::backtest::{run_rolling_backtest, BacktestConfig, BacktestResult, DayMode};
use crate::bucketing::{assign_buckets, BucketAssignment};
use crate::config::RunConfig;
use crate::data::{load_cap_panel, load_return_panel, load_scores, CapPanel, ReturnPanel, ScoreVector};
use crate::descriptives::{compute_descriptives, score_descriptives};
use crate::inference::TestParams;
use crate::optimizer::SolverConfig;
use crate::report::{build_result_table, emit_plot, run_tests, write_tests_csv, write_wealth_csv, OosSeries, PairTests, ResultTable};
use crate::strategies::{MvConfig, StrategyId};
use crate::Error;

/// Bootstrap results by strategy, then by bucket id.
pub type TestsByStrategy = BTreeMap<StrategyId, BTreeMap<usize, PairTests>>;
/// Out-of-sample series by strategy.
pub type OosByStrategy = BTreeMap<StrategyId, OosSeries>;

pub struct Inputs {
    pub returns: ReturnPanel,
    pub scores: ScoreVector,
    pub caps: CapPanel,
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, Error> {
    let returns = load_return_panel(cfg.returns_path()?)?;
    let scores = load_scores(cfg.scores_path()?, &returns)?;
    let caps = load_cap_panel(cfg.caps_path()?, &returns)?;
    Ok(Inputs { returns, scores, caps })
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn ensure_out_dir(cfg: &RunConfig) -> Result<&Path, Error> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| io(&cfg.out_dir, e))?;
    Ok(&cfg.out_dir)
}

pub fn oos_path(out: &Path, ws: usize, s: StrategyId) -> PathBuf {
    out.join(format!("oos_ws{ws}_{s}.csv"))
}

pub fn wealth_path(out: &Path, ws: usize, s: StrategyId) -> PathBuf {
    out.join(format!("wealth_ws{ws}_{s}.csv"))
}

pub fn plot_path(out: &Path, ws: usize, s: StrategyId) -> PathBuf {
    out.join(format!("wealth_ws{ws}_{s}.svg"))
}

pub fn metrics_path(out: &Path, ws: usize) -> PathBuf {
    out.join(format!("metrics_ws{ws}.csv"))
}

pub fn tests_path(out: &Path, ws: usize) -> PathBuf {
    out.join(format!("tests_ws{ws}.csv"))
}

/// Writes `descriptives.csv`: one row for the return panel (annualized,
/// cross-asset averages) and one for the score cross-section.
pub fn stage_describe(cfg: &RunConfig, returns: &ReturnPanel, scores: Option<&ScoreVector>) -> Result<PathBuf, Error> {
    let out = ensure_out_dir(cfg)?;
    let d = compute_descriptives(returns, cfg.annualization)?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:?}")).unwrap_or_default();
    let mut text = String::from("series,T,N,mean,sd,skewness,excess_kurtosis\n");
    let _ = writeln!(
        text,
        "returns,{},{},{:?},{:?},{},{}",
        d.n_dates,
        d.n_assets,
        d.mean_annualized,
        d.sd_annualized,
        opt(d.skewness),
        opt(d.excess_kurtosis)
    );
    if let Some(s) = scores {
        let m = score_descriptives(s);
        let _ = writeln!(text, "scores,,{},{:?},{:?},{},{}", s.len(), m.mean, m.sd, opt(m.skewness), opt(m.excess_kurtosis));
    }
    let path = out.join("descriptives.csv");
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

pub fn stage_bucket(cfg: &RunConfig, scores: &ScoreVector) -> Result<(BucketAssignment, Vec<PathBuf>), Error> {
    let out = ensure_out_dir(cfg)?;
    let buckets = assign_buckets(scores, cfg.k, cfg.allow_empty_pt1)?;
    let b = out.join("buckets.csv");
    let s = out.join("bucket_summary.csv");
    buckets.write_buckets_csv(&b).map_err(crate::report::ReportError::from)?;
    buckets.write_summary_csv(&s).map_err(crate::report::ReportError::from)?;
    Ok((buckets, vec![b, s]))
}

pub fn backtest_config(cfg: &RunConfig, buckets: &BucketAssignment, ws: usize) -> BacktestConfig {
    BacktestConfig {
        window_size: ws,
        strategies: cfg.strategies.clone(),
        buckets: buckets.clone(),
        annualization: cfg.annualization,
        mv: MvConfig {
            solver: SolverConfig { tol: cfg.tol, max_iter: cfg.max_iter },
            ridge_scale: cfg.ridge_scale,
        },
        day_mode: if cfg.parallel_days { DayMode::Parallel } else { DayMode::Sequential },
    }
}

/// Runs one window size and writes the oos, wealth and (optionally) weight files.
pub fn stage_backtest(
    cfg: &RunConfig,
    inputs: &Inputs,
    buckets: &BucketAssignment,
    ws: usize,
) -> Result<(BacktestResult, OosByStrategy, Vec<PathBuf>), Error> {
    let out = ensure_out_dir(cfg)?.to_path_buf();
    let result = run_rolling_backtest(&inputs.returns, &inputs.caps, &backtest_config(cfg, buckets, ws))?;
    let nc = result.non_converged_days();
    if nc > 0 {
        log::warn!("ws={ws}: {nc} solver days hit the iteration cap");
    }
    let mut files = Vec::new();
    let mut series = BTreeMap::new();
    let start = inputs.returns.dates[ws - 1];
    for &s in &cfg.strategies {
        let Some(oos) = OosSeries::from_backtest(&result, s) else { continue };
        let p = oos_path(&out, ws, s);
        oos.write_csv(&p)?;
        files.push(p);
        let w = wealth_path(&out, ws, s);
        write_wealth_csv(&w, start, &oos)?;
        files.push(w);
        series.insert(s, oos);
    }
    if cfg.dump_weights {
        for ((bucket, s), pair) in &result.pairs {
            let p = out.join(format!("weights_{bucket}_{s}_ws{ws}.csv"));
            pair.write_weights_csv(&p).map_err(crate::report::ReportError::from)?;
            files.push(p);
        }
    }
    Ok((result, series, files))
}

pub fn test_params(cfg: &RunConfig) -> Result<TestParams, Error> {
    Ok(TestParams { block_length: cfg.block_length, resamples: cfg.resamples, seed: cfg.seed()? })
}

pub fn stage_tests(
    cfg: &RunConfig,
    ws: usize,
    oos: &BTreeMap<StrategyId, OosSeries>,
) -> Result<(TestsByStrategy, PathBuf), Error> {
    let out = ensure_out_dir(cfg)?;
    let params = test_params(cfg)?;
    let mut tests = BTreeMap::new();
    for (&s, series) in oos {
        tests.insert(s, run_tests(series, s, &params)?);
    }
    let path = tests_path(out, ws);
    write_tests_csv(&path, &tests)?;
    Ok((tests, path))
}

pub fn stage_report(
    cfg: &RunConfig,
    ws: usize,
    buckets: &BucketAssignment,
    oos: &BTreeMap<StrategyId, OosSeries>,
    tests: &BTreeMap<StrategyId, BTreeMap<usize, PairTests>>,
) -> Result<(ResultTable, Vec<PathBuf>), Error> {
    let out = ensure_out_dir(cfg)?.to_path_buf();
    let table = build_result_table(ws, &cfg.strategies, buckets, oos, tests, cfg.annualization)?;
    let mut files = Vec::new();
    let m = metrics_path(&out, ws);
    table.write_csv(&m)?;
    files.push(m);
    let ids: Vec<usize> = buckets.buckets.iter().map(|b| b.id).collect();
    for &s in &cfg.strategies {
        let w = wealth_path(&out, ws, s);
        if w.exists() {
            let svg = plot_path(&out, ws, s);
            emit_plot(&w, &svg, &format!("{s} portfolios, ws={ws}"), &ids)?;
            files.push(svg);
        }
    }
    Ok((table, files))
}

fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = fs::read(path).map_err(|e| io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_manifest(cfg: &RunConfig) -> Result<PathBuf, Error> {
    let out = ensure_out_dir(cfg)?;
    let mut text = format!("tool=scorebucket {}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in cfg.echo() {
        let _ = writeln!(text, "{k}={v}");
    }
    for (name, p) in [("returns", &cfg.returns), ("scores", &cfg.scores), ("caps", &cfg.caps)] {
        if let Some(p) = p {
            let _ = writeln!(text, "sha256.{name}={}", sha256_file(p)?);
        }
    }
    let path = out.join("run_manifest");
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Full pipeline for every configured window size. Returns the written files
/// and the result tables by window size.
pub fn run_pipeline(cfg: &RunConfig) -> Result<(Vec<PathBuf>, BTreeMap<usize, ResultTable>), Error> {
    cfg.seed()?;
    let inputs = load_inputs(cfg)?;
    cfg.check_windows(inputs.returns.n_dates())?;
    let mut files = vec![write_manifest(cfg)?];
    files.push(stage_describe(cfg, &inputs.returns, Some(&inputs.scores))?);
    let (buckets, bfiles) = stage_bucket(cfg, &inputs.scores)?;
    files.extend(bfiles);
    let mut tables = BTreeMap::new();
    for &ws in &cfg.window_sizes {
        log::info!("window size {ws}: backtesting");
        let (_, oos, f) = stage_backtest(cfg, &inputs, &buckets, ws)?;
        files.extend(f);
        log::info!("window size {ws}: bootstrap tests");
        let (tests, tpath) = stage_tests(cfg, ws, &oos)?;
        files.push(tpath);
        let (table, f) = stage_report(cfg, ws, &buckets, &oos, &tests)?;
        files.extend(f);
        tables.insert(ws, table);
    }
    Ok((files, tables))
}

/// Reloads the oos series written by [`stage_backtest`].
pub fn read_oos(cfg: &RunConfig, ws: usize) -> Result<BTreeMap<StrategyId, OosSeries>, Error> {
    let mut out = BTreeMap::new();
    for &s in &cfg.strategies {
        out.insert(s, OosSeries::read_csv(&oos_path(&cfg.out_dir, ws, s))?);
    }
    Ok(out)
}
