//! Input panels: daily returns, market capitalizations and the score cross-section.
//!
//! All three are read from plain CSV. Return and cap files share the layout
//! `date,<asset1>,<asset2>,...` with ISO-8601 dates; the score file is
//! `asset_id,score`. Panels must be complete: partial histories are rejected,
//! never imputed.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::{Array2, ArrayView1};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("missing or unparseable cell at row {row}, column '{column}'")]
    MissingCell { row: usize, column: String },
    #[error("non-finite value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },
    #[error("cannot parse date '{value}' at row {row}")]
    BadDate { row: usize, value: String },
    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),
    #[error("dates not increasing: {later} follows {earlier}")]
    NonMonotonicDates { earlier: NaiveDate, later: NaiveDate },
    #[error("need at least 2 assets, found {0}")]
    TooFewAssets(usize),
    #[error("need at least 2 dates, found {0}")]
    TooFewDates(usize),
    #[error("duplicate asset identifier '{0}'")]
    DuplicateAsset(String),
    #[error("asset '{0}' has no score")]
    UnscoredAsset(String),
    #[error("score {score} for asset '{asset}' outside [0, 100]")]
    ScoreOutOfRange { asset: String, score: f64 },
    #[error("market cap {value} for asset '{asset}' on {date} is not strictly positive")]
    NonPositiveCap { asset: String, date: NaiveDate, value: f64 },
    #[error("panel mismatch: {0}")]
    Misaligned(String),
}

/// T×N matrix of daily simple returns (0.01 = +1%).
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
}

/// Market capitalizations on the same grid as a [`ReturnPanel`].
#[derive(Debug, Clone, PartialEq)]
pub struct CapPanel {
    pub dates: Vec<NaiveDate>,
    pub assets: Vec<String>,
    pub values: Array2<f64>,
}

/// One score per asset, in the order of the panel's asset list.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub assets: Vec<String>,
    pub scores: Vec<f64>,
}

impl ReturnPanel {
    /// Builds a panel after checking every invariant.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: Array2<f64>,
    ) -> Result<Self, DataError> {
        validate_grid(&dates, &assets, &values)?;
        if assets.len() < 2 {
            return Err(DataError::TooFewAssets(assets.len()));
        }
        if dates.len() < 2 {
            return Err(DataError::TooFewDates(dates.len()));
        }
        Ok(Self { dates, assets, values })
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn asset_index(&self) -> HashMap<&str, usize> {
        self.assets.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        write_grid(path, &self.dates, &self.assets, &self.values)
    }
}

impl CapPanel {
    /// Builds a cap panel aligned with `returns`; every value must be finite and positive.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: Array2<f64>,
        returns: &ReturnPanel,
    ) -> Result<Self, DataError> {
        validate_grid(&dates, &assets, &values)?;
        if dates != returns.dates {
            return Err(DataError::Misaligned("cap dates differ from return dates".into()));
        }
        if assets != returns.assets {
            return Err(DataError::Misaligned("cap assets differ from return assets".into()));
        }
        for ((t, j), &v) in values.indexed_iter() {
            if v <= 0.0 {
                return Err(DataError::NonPositiveCap {
                    asset: assets[j].clone(),
                    date: dates[t],
                    value: v,
                });
            }
        }
        Ok(Self { dates, assets, values })
    }

    pub fn row(&self, t: usize) -> ArrayView1<'_, f64> {
        self.values.row(t)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        write_grid(path, &self.dates, &self.assets, &self.values)
    }
}

impl ScoreVector {
    pub fn new(assets: Vec<String>, scores: Vec<f64>) -> Result<Self, DataError> {
        if assets.len() != scores.len() {
            return Err(DataError::Misaligned(format!(
                "{} assets but {} scores",
                assets.len(),
                scores.len()
            )));
        }
        let mut seen = HashSet::new();
        for (a, &s) in assets.iter().zip(&scores) {
            if !seen.insert(a.as_str()) {
                return Err(DataError::DuplicateAsset(a.clone()));
            }
            if !s.is_finite() || !(0.0..=100.0).contains(&s) {
                return Err(DataError::ScoreOutOfRange { asset: a.clone(), score: s });
            }
        }
        Ok(Self { assets, scores })
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.assets.iter().position(|a| a == asset).map(|i| self.scores[i])
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["asset_id", "score"])?;
        for (a, s) in self.assets.iter().zip(&self.scores) {
            w.write_record([a.as_str(), &s.to_string()])?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
        Ok(())
    }
}

fn validate_grid(
    dates: &[NaiveDate],
    assets: &[String],
    values: &Array2<f64>,
) -> Result<(), DataError> {
    if values.dim() != (dates.len(), assets.len()) {
        return Err(DataError::Misaligned(format!(
            "matrix is {:?}, expected ({}, {})",
            values.dim(),
            dates.len(),
            assets.len()
        )));
    }
    check_dates(dates)?;
    let mut seen = HashSet::new();
    for a in assets {
        if !seen.insert(a.as_str()) {
            return Err(DataError::DuplicateAsset(a.clone()));
        }
    }
    for ((t, j), v) in values.indexed_iter() {
        if !v.is_finite() {
            return Err(DataError::NonFinite { row: t + 1, column: assets[j].clone() });
        }
    }
    Ok(())
}

fn check_dates(dates: &[NaiveDate]) -> Result<(), DataError> {
    for pair in dates.windows(2) {
        if pair[1] == pair[0] {
            return Err(DataError::DuplicateDate(pair[1]));
        }
        if pair[1] < pair[0] {
            return Err(DataError::NonMonotonicDates { earlier: pair[0], later: pair[1] });
        }
    }
    Ok(())
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io { path: path.display().to_string(), source }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| io_err(path, e))
}

struct RawGrid {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Array2<f64>,
}

/// Parses a `date,<asset...>` grid. Row numbers in errors are 1-based data rows.
fn read_grid<R: Read>(reader: R) -> Result<RawGrid, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut cols = header.iter().map(|h| h.trim().trim_start_matches('\u{feff}'));
    match cols.next() {
        Some(first) if first.eq_ignore_ascii_case("date") => {}
        other => {
            return Err(DataError::BadHeader(format!(
                "first column must be 'date', found {:?}",
                other.unwrap_or("")
            )))
        }
    }
    let assets: Vec<String> = cols.map(str::to_owned).collect();
    let n = assets.len();

    let mut dates = Vec::new();
    let mut flat = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let raw_date = rec.get(0).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d")
            .map_err(|_| DataError::BadDate { row, value: raw_date.to_owned() })?;
        dates.push(date);
        for (j, asset) in assets.iter().enumerate() {
            let cell = rec.get(j + 1).map(str::trim).unwrap_or("");
            let v: f64 = cell
                .parse()
                .map_err(|_| DataError::MissingCell { row, column: asset.clone() })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite { row, column: asset.clone() });
            }
            flat.push(v);
        }
        if rec.len() > n + 1 {
            return Err(DataError::BadHeader(format!("row {row} has more cells than the header")));
        }
    }
    let values = Array2::from_shape_vec((dates.len(), n), flat)
        .map_err(|e| DataError::Misaligned(e.to_string()))?;
    Ok(RawGrid { dates, assets, values })
}

fn write_grid(
    path: &Path,
    dates: &[NaiveDate],
    assets: &[String],
    values: &Array2<f64>,
) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut line = String::from("date");
    for a in assets {
        line.push(',');
        line.push_str(a);
    }
    writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    for (t, d) in dates.iter().enumerate() {
        line.clear();
        line.push_str(&d.format("%Y-%m-%d").to_string());
        for v in values.row(t) {
            line.push(',');
            // shortest representation that re-parses to the same f64
            line.push_str(&format!("{v:?}"));
        }
        writeln!(out, "{line}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn parse_return_panel<R: Read>(reader: R) -> Result<ReturnPanel, DataError> {
    let g = read_grid(reader)?;
    ReturnPanel::new(g.dates, g.assets, g.values)
}

pub fn load_return_panel(path: &Path) -> Result<ReturnPanel, DataError> {
    parse_return_panel(open(path)?)
}

pub fn parse_cap_panel<R: Read>(reader: R, returns: &ReturnPanel) -> Result<CapPanel, DataError> {
    let g = read_grid(reader)?;
    CapPanel::new(g.dates, g.assets, g.values, returns)
}

pub fn load_cap_panel(path: &Path, returns: &ReturnPanel) -> Result<CapPanel, DataError> {
    parse_cap_panel(open(path)?, returns)
}

/// Reads `asset_id,score` rows and aligns them to the panel's asset order.
///
/// Assets in the file but not in the panel are returned in the second slot
/// and otherwise ignored.
pub fn parse_scores<R: Read>(
    reader: R,
    panel: &ReturnPanel,
) -> Result<(ScoreVector, Vec<String>), DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().map(|h| h.trim().trim_start_matches('\u{feff}')).collect();
    if names.len() < 2 || names[0] != "asset_id" || names[1] != "score" {
        return Err(DataError::BadHeader(format!("expected 'asset_id,score', found {names:?}")));
    }
    let index = panel.asset_index();
    let mut by_asset: HashMap<String, f64> = HashMap::new();
    let mut unknown = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let asset = rec.get(0).unwrap_or("").trim().to_owned();
        let cell = rec.get(1).unwrap_or("").trim();
        let score: f64 =
            cell.parse().map_err(|_| DataError::MissingCell { row, column: "score".into() })?;
        if !score.is_finite() || !(0.0..=100.0).contains(&score) {
            return Err(DataError::ScoreOutOfRange { asset, score });
        }
        if !index.contains_key(asset.as_str()) {
            unknown.push(asset);
            continue;
        }
        if by_asset.insert(asset.clone(), score).is_some() {
            return Err(DataError::DuplicateAsset(asset));
        }
    }
    let mut scores = Vec::with_capacity(panel.n_assets());
    for a in &panel.assets {
        match by_asset.get(a) {
            Some(&s) => scores.push(s),
            None => return Err(DataError::UnscoredAsset(a.clone())),
        }
    }
    Ok((ScoreVector::new(panel.assets.clone(), scores)?, unknown))
}

pub fn load_scores(path: &Path, panel: &ReturnPanel) -> Result<ScoreVector, DataError> {
    let (scores, unknown) = parse_scores(open(path)?, panel)?;
    for a in unknown {
        log::warn!("score file lists asset '{a}' which is not in the return panel; ignored");
    }
    Ok(scores)
}
