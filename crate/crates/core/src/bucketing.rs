//! Score buckets: PT1 holds every zero-score asset, PT2…PT(k+1) split the
//! strictly positive scores into `k` equal-probability groups by rank.
//!
//! Positive-score assets are ordered by (score, asset id) and the asset at
//! 0-based rank `r` among `m` goes to bucket `2 + floor(r·k/m)`. Rank cuts make
//! group sizes differ by at most one and make the assignment invariant to any
//! strictly increasing transform of the scores.

use std::path::Path;

use thiserror::Error;

use crate::data::ScoreVector;

pub const DEFAULT_BUCKETS: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum BucketError {
    #[error("empty asset universe")]
    EmptyUniverse,
    #[error("bucket count k must be at least 1")]
    InvalidK,
    #[error("only {positive} positive-score assets for {k} buckets")]
    TooFewAssets { positive: usize, k: usize },
    #[error("no zero-score assets; pass allow_empty_pt1 to accept an empty first bucket")]
    EmptyZeroBucket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    /// 1-based bucket id.
    pub id: usize,
    pub assets: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Bucket {
    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn summary(&self) -> Option<ScoreSummary> {
        if self.scores.is_empty() {
            return None;
        }
        let min = self.scores.iter().copied().fold(f64::INFINITY, f64::min);
        let max = self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = self.scores.iter().sum::<f64>() / self.scores.len() as f64;
        Some(ScoreSummary { min, mean, max })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketAssignment {
    pub buckets: Vec<Bucket>,
    /// Lowest score of each of buckets 3…k+1: the k−1 interior cuts.
    pub cut_points: Vec<f64>,
}

impl BucketAssignment {
    pub fn k(&self) -> usize {
        self.buckets.len() - 1
    }

    pub fn bucket(&self, id: usize) -> Option<&Bucket> {
        self.buckets.get(id.checked_sub(1)?)
    }

    pub fn bucket_of(&self, asset: &str) -> Option<usize> {
        self.buckets.iter().find(|b| b.assets.iter().any(|a| a == asset)).map(|b| b.id)
    }

    pub fn write_buckets_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bucket_id", "asset_id", "score"])?;
        for b in &self.buckets {
            for (a, s) in b.assets.iter().zip(&b.scores) {
                w.write_record([b.id.to_string().as_str(), a, &s.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bucket_id", "n_assets", "min_score", "mean_score", "max_score"])?;
        for b in &self.buckets {
            let (min, mean, max) = match b.summary() {
                Some(s) => (s.min.to_string(), s.mean.to_string(), s.max.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([b.id.to_string(), b.len().to_string(), min, mean, max])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn assign_buckets(
    scores: &ScoreVector,
    k: usize,
    allow_empty_pt1: bool,
) -> Result<BucketAssignment, BucketError> {
    if scores.is_empty() {
        return Err(BucketError::EmptyUniverse);
    }
    if k == 0 {
        return Err(BucketError::InvalidK);
    }
    let mut zero: Vec<(&str, f64)> = Vec::new();
    let mut positive: Vec<(&str, f64)> = Vec::new();
    for (a, &s) in scores.assets.iter().zip(&scores.scores) {
        if s == 0.0 {
            zero.push((a, s));
        } else {
            positive.push((a, s));
        }
    }
    if zero.is_empty() && !allow_empty_pt1 {
        return Err(BucketError::EmptyZeroBucket);
    }
    let m = positive.len();
    if m < k {
        return Err(BucketError::TooFewAssets { positive: m, k });
    }
    zero.sort_by(|x, y| x.0.cmp(y.0));
    positive.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(y.0)));

    let mut buckets: Vec<Bucket> =
        (1..=k + 1).map(|id| Bucket { id, assets: Vec::new(), scores: Vec::new() }).collect();
    for (a, s) in zero {
        buckets[0].assets.push(a.to_owned());
        buckets[0].scores.push(s);
    }
    for (r, (a, s)) in positive.into_iter().enumerate() {
        let idx = 1 + r * k / m;
        buckets[idx].assets.push(a.to_owned());
        buckets[idx].scores.push(s);
    }
    let cut_points = buckets[2..].iter().map(|b| b.scores[0]).collect();
    Ok(BucketAssignment { buckets, cut_points })
}

pub fn bucket_sizes(assignment: &BucketAssignment) -> Vec<usize> {
    assignment.buckets.iter().map(Bucket::len).collect()
}
