//! Run configuration: a flat `key = value` file plus programmatic overrides.
//!
//! ```text
//! # comments start with '#'
//! returns = data/returns.csv
//! scores = data/scores.csv
//! caps = data/caps.csv
//! k = 6
//! ws = 430,250,170,84
//! strategies = MV,EW,MC
//! seed = 20220328
//! out_dir = out
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::strategies::StrategyId;

/// Window sizes used when none are configured.
pub const DEFAULT_WINDOW_SIZES: [usize; 4] = [430, 250, 170, 84];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("line {line}: expected key = value")]
    Syntax { line: usize },
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("invalid value for '{key}': {value}")]
    BadValue { key: String, value: String },
    #[error("missing required setting '{0}'")]
    Missing(&'static str),
    #[error("window size {ws} must be at least 2 and below the number of dates {t}")]
    WindowTooLong { ws: usize, t: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub returns: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub caps: Option<PathBuf>,
    pub k: usize,
    pub window_sizes: Vec<usize>,
    pub strategies: Vec<StrategyId>,
    pub annualization: u32,
    pub block_length: usize,
    pub resamples: usize,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub ridge_scale: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub allow_empty_pt1: bool,
    pub dump_weights: bool,
    /// Fit days of a pair in parallel with cold-started solves.
    pub parallel_days: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            returns: None,
            scores: None,
            caps: None,
            k: crate::bucketing::DEFAULT_BUCKETS,
            window_sizes: DEFAULT_WINDOW_SIZES.to_vec(),
            strategies: StrategyId::ALL.to_vec(),
            annualization: crate::descriptives::DEFAULT_ANNUALIZATION,
            block_length: crate::inference::DEFAULT_BLOCK_LENGTH,
            resamples: crate::inference::DEFAULT_RESAMPLES,
            seed: None,
            out_dir: PathBuf::from("out"),
            ridge_scale: crate::covariance::DEFAULT_RIDGE_SCALE,
            tol: crate::optimizer::DEFAULT_TOL,
            max_iter: crate::optimizer::DEFAULT_MAX_ITER,
            allow_empty_pt1: false,
            dump_weights: false,
            parallel_days: false,
        }
    }
}

fn bad(key: &str, value: &str) -> ConfigError {
    ConfigError::BadValue { key: key.to_owned(), value: value.to_owned() }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

pub fn parse_window_sizes(value: &str) -> Result<Vec<usize>, ConfigError> {
    let out: Vec<usize> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num::<usize>("ws", s))
        .collect::<Result<_, _>>()?;
    if out.is_empty() || out.iter().any(|&w| w < 2) {
        return Err(bad("ws", value));
    }
    Ok(out)
}

pub fn parse_strategies(value: &str) -> Result<Vec<StrategyId>, ConfigError> {
    let mut out = Vec::new();
    for s in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let id: StrategyId = s.parse().map_err(|_| bad("strategies", value))?;
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(bad("strategies", value));
    }
    Ok(out)
}

impl RunConfig {
    /// Applies one `key = value` setting. Paths are joined onto `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let path = || {
            let p = PathBuf::from(value);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        match key {
            "returns" => self.returns = Some(path()),
            "scores" => self.scores = Some(path()),
            "caps" => self.caps = Some(path()),
            "out_dir" => self.out_dir = path(),
            "k" => {
                self.k = parse_num(key, value)?;
                if self.k == 0 {
                    return Err(bad(key, value));
                }
            }
            "ws" | "window_sizes" => self.window_sizes = parse_window_sizes(value)?,
            "strategies" | "strategy" => self.strategies = parse_strategies(value)?,
            "annualization" => {
                self.annualization = parse_num(key, value)?;
                if self.annualization == 0 {
                    return Err(bad(key, value));
                }
            }
            "block_length" => {
                self.block_length = parse_num(key, value)?;
                if self.block_length == 0 {
                    return Err(bad(key, value));
                }
            }
            "resamples" => {
                self.resamples = parse_num(key, value)?;
                if self.resamples == 0 {
                    return Err(bad(key, value));
                }
            }
            "seed" => self.seed = Some(parse_num(key, value)?),
            "ridge_scale" => {
                self.ridge_scale = parse_num(key, value)?;
                if !(self.ridge_scale >= 0.0) || !self.ridge_scale.is_finite() {
                    return Err(bad(key, value));
                }
            }
            "tol" => {
                self.tol = parse_num(key, value)?;
                if !(self.tol > 0.0) {
                    return Err(bad(key, value));
                }
            }
            "max_iter" => {
                self.max_iter = parse_num(key, value)?;
                if self.max_iter == 0 {
                    return Err(bad(key, value));
                }
            }
            "allow_empty_pt1" => self.allow_empty_pt1 = parse_bool(key, value)?,
            "dump_weights" => self.dump_weights = parse_bool(key, value)?,
            "parallel_days" => self.parallel_days = parse_bool(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_owned())),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(key.trim(), value.trim(), base)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read { path: path.display().to_string(), reason: e.to_string() })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or(ConfigError::Missing("seed"))
    }

    pub fn returns_path(&self) -> Result<&Path, ConfigError> {
        self.returns.as_deref().ok_or(ConfigError::Missing("returns"))
    }

    pub fn scores_path(&self) -> Result<&Path, ConfigError> {
        self.scores.as_deref().ok_or(ConfigError::Missing("scores"))
    }

    pub fn caps_path(&self) -> Result<&Path, ConfigError> {
        self.caps.as_deref().ok_or(ConfigError::Missing("caps"))
    }

    /// Checks every window size against the panel length.
    pub fn check_windows(&self, n_dates: usize) -> Result<(), ConfigError> {
        for &ws in &self.window_sizes {
            if ws < 2 || ws >= n_dates {
                return Err(ConfigError::WindowTooLong { ws, t: n_dates });
            }
        }
        Ok(())
    }

    /// `key=value` lines echoing the effective configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let list = |v: Vec<String>| v.join(",");
        vec![
            ("returns".into(), p(&self.returns)),
            ("scores".into(), p(&self.scores)),
            ("caps".into(), p(&self.caps)),
            ("k".into(), self.k.to_string()),
            ("ws".into(), list(self.window_sizes.iter().map(ToString::to_string).collect())),
            ("strategies".into(), list(self.strategies.iter().map(ToString::to_string).collect())),
            ("annualization".into(), self.annualization.to_string()),
            ("block_length".into(), self.block_length.to_string()),
            ("resamples".into(), self.resamples.to_string()),
            ("seed".into(), self.seed.map(|s| s.to_string()).unwrap_or_default()),
            ("ridge_scale".into(), format!("{:?}", self.ridge_scale)),
            ("tol".into(), format!("{:?}", self.tol)),
            ("max_iter".into(), self.max_iter.to_string()),
            ("allow_empty_pt1".into(), self.allow_empty_pt1.to_string()),
            ("parallel_days".into(), self.parallel_days.to_string()),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_resolves_paths() {
        let text = "# test\nreturns = r.csv\nscores=/abs/s.csv\nk = 4\nws = 170, 84\nstrategies = EW,mv\nseed = 7\n";
        let cfg = RunConfig::parse(text, Path::new("/base")).unwrap();
        assert_eq!(cfg.returns.as_deref(), Some(Path::new("/base/r.csv")));
        assert_eq!(cfg.scores.as_deref(), Some(Path::new("/abs/s.csv")));
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.window_sizes, vec![170, 84]);
        assert_eq!(cfg.strategies, vec![StrategyId::EquallyWeighted, StrategyId::MinimumVariance]);
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.block_length, 5);
        assert_eq!(cfg.resamples, 4999);
    }

    #[test]
    fn defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.window_sizes, vec![430, 250, 170, 84]);
        assert_eq!(cfg.k, 6);
        assert_eq!(cfg.seed(), Err(ConfigError::Missing("seed")));
    }

    #[test]
    fn errors() {
        assert_eq!(RunConfig::parse("nonsense", Path::new("")), Err(ConfigError::Syntax { line: 1 }));
        assert!(matches!(RunConfig::parse("colour = red", Path::new("")), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse("k = 0", Path::new("")), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("ws = 1", Path::new("")), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("strategies = XX", Path::new("")), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn window_check() {
        let cfg = RunConfig { window_sizes: vec![170, 800], ..Default::default() };
        assert_eq!(cfg.check_windows(800), Err(ConfigError::WindowTooLong { ws: 800, t: 800 }));
        assert!(cfg.check_windows(801).is_ok());
    }
}
