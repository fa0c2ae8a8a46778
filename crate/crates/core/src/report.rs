//! Result tables, CSV writers/readers for pipeline stages, and SVG wealth plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::backtest::BacktestResult;
use crate::bucketing::BucketAssignment;
use crate::inference::{sharpe_diff_test, variance_diff_test, InferenceError, Stars, TestKind, TestParams, TestResult};
use crate::metrics::{wealth_curve, MetricsError, PerformanceReport};
use crate::strategies::StrategyId;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing input {0}")]
    MissingInput(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed {file}: {reason}")]
    Malformed { file: String, reason: String },
    #[error("metrics for strategy {strategy}, bucket {bucket}: {source}")]
    Metrics {
        strategy: StrategyId,
        bucket: usize,
        #[source]
        source: MetricsError,
    },
    #[error("test for strategy {strategy}, bucket {bucket} vs 1: {source}")]
    Inference {
        strategy: StrategyId,
        bucket: usize,
        #[source]
        source: InferenceError,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

fn malformed(path: &Path, reason: impl Into<String>) -> ReportError {
    ReportError::Malformed { file: path.display().to_string(), reason: reason.into() }
}

/// Formats with 6 significant digits as a plain decimal, falling back to
/// scientific notation for very large or very small magnitudes.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-7..=15).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a new leading digit (e.g. 9.999995 → 10.00000)
    let digits = s.chars().filter(char::is_ascii_digit).skip_while(|&c| c == '0').count();
    if digits > 6 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// Out-of-sample return series per bucket for one (ws, strategy).
#[derive(Debug, Clone, PartialEq)]
pub struct OosSeries {
    pub dates: Vec<NaiveDate>,
    /// bucket id → returns, all of length `dates.len()`.
    pub buckets: BTreeMap<usize, Vec<f64>>,
}

impl OosSeries {
    pub fn from_backtest(result: &BacktestResult, strategy: StrategyId) -> Option<Self> {
        let mut dates = None;
        let mut buckets = BTreeMap::new();
        for ((bucket, s), pair) in &result.pairs {
            if *s == strategy {
                dates.get_or_insert_with(|| pair.oos_dates.clone());
                buckets.insert(*bucket, pair.oos_returns.clone());
            }
        }
        Some(Self { dates: dates?, buckets })
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let mut out = String::from("date");
        for id in self.buckets.keys() {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for (t, d) in self.dates.iter().enumerate() {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for series in self.buckets.values() {
                let _ = write!(out, ",{:?}", series[t]);
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| io_err(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self, ReportError> {
        if !path.exists() {
            return Err(ReportError::MissingInput(path.display().to_string()));
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.clone();
        let ids: Vec<usize> = header
            .iter()
            .skip(1)
            .map(|h| h.parse().map_err(|_| malformed(path, format!("bad bucket id '{h}'"))))
            .collect::<Result<_, _>>()?;
        let mut dates = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let d = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|_| malformed(path, format!("bad date '{}'", &rec[0])))?;
            dates.push(d);
            for (j, col) in cols.iter_mut().enumerate() {
                let v = rec
                    .get(j + 1)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| malformed(path, format!("bad cell on {d}")))?;
                col.push(v);
            }
        }
        Ok(Self { dates, buckets: ids.into_iter().zip(cols).collect() })
    }
}

/// Variance and Sharpe tests of one bucket against bucket 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTests {
    pub variance: TestResult,
    pub sharpe: TestResult,
}

/// Tests every bucket ≥ 2 against bucket 1. Returns an empty map when bucket 1
/// has no series.
pub fn run_tests(oos: &OosSeries, strategy: StrategyId, params: &TestParams) -> Result<BTreeMap<usize, PairTests>, ReportError> {
    let mut out = BTreeMap::new();
    let Some(reference) = oos.buckets.get(&1) else {
        return Ok(out);
    };
    for (&bucket, series) in oos.buckets.iter().filter(|(&id, _)| id != 1) {
        let wrap = |source| ReportError::Inference { strategy, bucket, source };
        let variance = variance_diff_test(series, reference, params).map_err(wrap)?;
        let sharpe = sharpe_diff_test(series, reference, params).map_err(wrap)?;
        out.insert(bucket, PairTests { variance, sharpe });
    }
    Ok(out)
}

const TESTS_HEADER: [&str; 10] =
    ["strategy", "bucket_id", "kind", "difference", "statistic", "p_value", "stars", "block_length", "resamples", "seed"];

pub fn write_tests_csv(path: &Path, tests: &BTreeMap<StrategyId, BTreeMap<usize, PairTests>>) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TESTS_HEADER)?;
    for (strategy, per_bucket) in tests {
        for (bucket, pt) in per_bucket {
            for (kind, r) in [("variance", &pt.variance), ("sharpe", &pt.sharpe)] {
                w.write_record([
                    strategy.code().to_owned(),
                    bucket.to_string(),
                    kind.to_owned(),
                    format!("{:?}", r.difference),
                    format!("{:?}", r.statistic),
                    format!("{:?}", r.p_value),
                    r.stars.to_string(),
                    r.block_length.to_string(),
                    r.resamples.to_string(),
                    r.seed.to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn read_tests_csv(path: &Path) -> Result<BTreeMap<StrategyId, BTreeMap<usize, PairTests>>, ReportError> {
    if !path.exists() {
        return Err(ReportError::MissingInput(path.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut partial: BTreeMap<(StrategyId, usize), (Option<TestResult>, Option<TestResult>)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |what: &str| malformed(path, format!("bad {what} in row {:?}", rec.iter().collect::<Vec<_>>()));
        let strategy: StrategyId = rec[0].parse().map_err(|_| bad("strategy"))?;
        let bucket: usize = rec[1].parse().map_err(|_| bad("bucket"))?;
        let kind = match &rec[2] {
            "variance" => TestKind::VarianceDiff,
            "sharpe" => TestKind::SharpeDiff,
            _ => return Err(bad("kind")),
        };
        let num = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(TESTS_HEADER[i]));
        let p_value = num(5)?;
        let r = TestResult {
            kind,
            difference: num(3)?,
            statistic: num(4)?,
            p_value,
            stars: crate::inference::star_annotation(p_value).map_err(|_| bad("p_value"))?,
            block_length: rec[7].parse().map_err(|_| bad("block_length"))?,
            resamples: rec[8].parse().map_err(|_| bad("resamples"))?,
            seed: rec[9].parse().map_err(|_| bad("seed"))?,
        };
        let slot = partial.entry((strategy, bucket)).or_default();
        match kind {
            TestKind::VarianceDiff => slot.0 = Some(r),
            TestKind::SharpeDiff => slot.1 = Some(r),
        }
    }
    let mut out: BTreeMap<StrategyId, BTreeMap<usize, PairTests>> = BTreeMap::new();
    for ((strategy, bucket), (v, s)) in partial {
        let (Some(variance), Some(sharpe)) = (v, s) else {
            return Err(malformed(path, format!("incomplete tests for {strategy} bucket {bucket}")));
        };
        out.entry(strategy).or_default().insert(bucket, PairTests { variance, sharpe });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub strategy: StrategyId,
    pub bucket_id: usize,
    pub n_assets: usize,
    /// `None` for an empty bucket.
    pub performance: Option<PerformanceReport>,
    pub variance_test: Option<TestResult>,
    pub sharpe_test: Option<TestResult>,
    pub is_min_variance: bool,
    pub is_max_sharpe: bool,
}

impl ResultRow {
    pub fn variance_stars(&self) -> Stars {
        self.variance_test.as_ref().map(|t| t.stars).unwrap_or_default()
    }

    pub fn sharpe_stars(&self) -> Stars {
        self.sharpe_test.as_ref().map(|t| t.stars).unwrap_or_default()
    }
}

/// One block of rows per strategy, one row per bucket in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub window_size: usize,
    pub rows: Vec<ResultRow>,
}

pub fn build_result_table(
    window_size: usize,
    strategies: &[StrategyId],
    buckets: &BucketAssignment,
    oos: &BTreeMap<StrategyId, OosSeries>,
    tests: &BTreeMap<StrategyId, BTreeMap<usize, PairTests>>,
    annualization: u32,
) -> Result<ResultTable, ReportError> {
    let mut rows = Vec::new();
    for &strategy in strategies {
        let start = rows.len();
        for bucket in &buckets.buckets {
            let series = oos.get(&strategy).and_then(|o| o.buckets.get(&bucket.id));
            let performance = series
                .map(|s| PerformanceReport::from_series(s, annualization))
                .transpose()
                .map_err(|source| ReportError::Metrics { strategy, bucket: bucket.id, source })?;
            let t = tests.get(&strategy).and_then(|m| m.get(&bucket.id));
            rows.push(ResultRow {
                strategy,
                bucket_id: bucket.id,
                n_assets: bucket.len(),
                performance,
                variance_test: t.map(|p| p.variance.clone()),
                sharpe_test: t.map(|p| p.sharpe.clone()),
                is_min_variance: false,
                is_max_sharpe: false,
            });
        }
        mark_extremes(&mut rows[start..]);
    }
    Ok(ResultTable { window_size, rows })
}

/// Flags the lowest variance and highest Sharpe in a strategy block; ties go
/// to the lowest bucket id, which comes first in the block.
fn mark_extremes(block: &mut [ResultRow]) {
    let mut min_var: Option<(usize, f64)> = None;
    let mut max_sr: Option<(usize, f64)> = None;
    for (i, row) in block.iter().enumerate() {
        let Some(p) = &row.performance else { continue };
        if min_var.is_none_or(|(_, v)| p.variance_annualized < v) {
            min_var = Some((i, p.variance_annualized));
        }
        if let Some(sr) = p.sharpe_daily {
            if max_sr.is_none_or(|(_, v)| sr > v) {
                max_sr = Some((i, sr));
            }
        }
    }
    if let Some((i, _)) = min_var {
        block[i].is_min_variance = true;
    }
    if let Some((i, _)) = max_sr {
        block[i].is_max_sharpe = true;
    }
}

const METRICS_HEADER: &str = "strategy,bucket_id,n_assets,m,variance_annualized,variance_stars,mean_annualized,sharpe_daily,sharpe_stars,var95,sd_annualized,variance_p_value,sharpe_p_value,is_min_variance,is_max_sharpe";

impl ResultTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        let opt = |x: Option<f64>| x.map(sig6).unwrap_or_default();
        for r in &self.rows {
            let p = r.performance.as_ref();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.strategy,
                r.bucket_id,
                r.n_assets,
                p.map(|p| p.m.to_string()).unwrap_or_default(),
                opt(p.map(|p| p.variance_annualized)),
                r.variance_stars(),
                opt(p.map(|p| p.mean_annualized)),
                opt(p.and_then(|p| p.sharpe_daily)),
                r.sharpe_stars(),
                opt(p.map(|p| p.var95)),
                opt(p.map(|p| p.sd_annualized)),
                opt(r.variance_test.as_ref().map(|t| t.p_value)),
                opt(r.sharpe_test.as_ref().map(|t| t.p_value)),
                u8::from(r.is_min_variance),
                u8::from(r.is_max_sharpe),
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        fs::write(path, self.to_csv_string()).map_err(|e| io_err(path, e))
    }

    /// Plain-text rendering in the layout of a printed results table:
    /// stars appended to values, bold markers shown as `[..]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "window size {}", self.window_size);
        let _ = writeln!(out, "{:<9}{:>4}{:>16}{:>12}{:>16}{:>12}", "strategy", "PT", "var (ann.)", "mean (ann.)", "SR (daily)", "VaR 95%");
        for r in &self.rows {
            let Some(p) = &r.performance else {
                let _ = writeln!(out, "{:<9}{:>4}{:>16}", r.strategy, r.bucket_id, "(empty)");
                continue;
            };
            let mark = |v: String, on: bool| if on { format!("[{v}]") } else { v };
            let var = mark(format!("{:.4}{}", p.variance_annualized, r.variance_stars()), r.is_min_variance);
            let sr = match p.sharpe_daily {
                Some(s) => mark(format!("{s:.4}{}", r.sharpe_stars()), r.is_max_sharpe),
                None => "NA".into(),
            };
            let _ = writeln!(
                out,
                "{:<9}{:>4}{:>16}{:>12.4}{:>16}{:>12.4}",
                r.strategy, r.bucket_id, var, p.mean_annualized, sr, p.var95
            );
        }
        out
    }
}

/// Wealth curves per bucket, each prefixed with the starting value 1.0 dated
/// at the last in-sample day: M + 1 rows per bucket.
pub fn write_wealth_csv(path: &Path, start_date: NaiveDate, oos: &OosSeries) -> Result<(), ReportError> {
    let mut out = String::from("bucket_id,date,wealth\n");
    for (id, series) in &oos.buckets {
        let curve = wealth_curve(series).map_err(|source| ReportError::Malformed {
            file: path.display().to_string(),
            reason: format!("bucket {id}: {source}"),
        })?;
        let _ = writeln!(out, "{id},{},1.0", start_date.format("%Y-%m-%d"));
        for (d, w) in oos.dates.iter().zip(curve) {
            let _ = writeln!(out, "{id},{},{w:?}", d.format("%Y-%m-%d"));
        }
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];

/// Renders a wealth CSV as a static SVG line chart, one polyline per bucket.
///
/// Buckets listed in `expected_buckets` without data are left out of the
/// legend with a warning. Returns the number of polylines drawn.
pub fn emit_plot(wealth_csv: &Path, out: &Path, title: &str, expected_buckets: &[usize]) -> Result<usize, ReportError> {
    if !wealth_csv.exists() {
        return Err(ReportError::MissingInput(wealth_csv.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(wealth_csv)?;
    let mut series: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id: usize = rec[0].parse().map_err(|_| malformed(wealth_csv, "bad bucket id"))?;
        let w: f64 = rec[2].parse().map_err(|_| malformed(wealth_csv, "bad wealth value"))?;
        series.entry(id).or_default().push(w);
    }
    for id in expected_buckets {
        if !series.contains_key(id) {
            log::warn!("bucket {id} has no wealth data; omitted from {}", out.display());
        }
    }

    let (width, height) = (800.0, 480.0);
    let (left, right, top, bottom) = (60.0, 110.0, 40.0, 40.0);
    let pw = width - left - right;
    let ph = height - top - bottom;
    let len = series.values().map(Vec::len).max().unwrap_or(1).max(2);
    let mut lo = series.values().flatten().copied().fold(f64::INFINITY, f64::min);
    let mut hi = series.values().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        (lo, hi) = (0.0, 2.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let x = |i: usize| left + pw * i as f64 / (len - 1) as f64;
    let y = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    let _ = writeln!(svg, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"#,
            left - 6.0,
            y(v) + 4.0,
            v
        );
    }
    for (k, (id, values)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let mut points = String::new();
        for (i, &v) in values.iter().enumerate() {
            let _ = write!(points, "{:.2},{:.2} ", x(i), y(v));
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.trim_end()
        );
        let ly = top + 16.0 * k as f64 + 10.0;
        let lx = width - right + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12">PT {id}</text>"#, lx + 24.0, ly + 4.0);
    }
    svg.push_str("</svg>\n");
    let mut f = fs::File::create(out).map_err(|e| io_err(out, e))?;
    f.write_all(svg.as_bytes()).map_err(|e| io_err(out, e))?;
    Ok(series.len())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
