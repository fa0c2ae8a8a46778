//! Rolling backtest and pipeline behaviour on synthetic panels.

use ndarray::{s, Axis};

use scorebucket::pipeline::{metrics_path, run_pipeline};
use scorebucket::synthetic::{generate, SyntheticData, SyntheticSpec};
use scorebucket::{
    assign_buckets, run_rolling_backtest, BacktestConfig, DayMode, MvConfig, RunConfig, StrategyId, WeightVector,
};

fn data(seed: u64) -> SyntheticData {
    generate(&SyntheticSpec { n_dates: 260, n_assets: 40, n_zero_score: 8, seed, ..Default::default() })
}

fn config(d: &SyntheticData, ws: usize, mode: DayMode) -> BacktestConfig {
    BacktestConfig {
        window_size: ws,
        strategies: StrategyId::ALL.to_vec(),
        buckets: assign_buckets(&d.scores, 3, false).unwrap(),
        annualization: 252,
        mv: MvConfig::default(),
        day_mode: mode,
    }
}

#[test]
fn no_look_ahead() {
    let d = data(1);
    let ws = 60;
    let base = run_rolling_backtest(&d.returns, &d.caps, &config(&d, ws, DayMode::Sequential)).unwrap();
    let cut = 150;
    let mut mutated = d.clone();
    mutated.returns.values.slice_mut(s![cut + 2.., ..]).mapv_inplace(|v| -3.0 * v + 0.01);
    let other = run_rolling_backtest(&mutated.returns, &d.caps, &config(&d, ws, DayMode::Sequential)).unwrap();
    for (key, pair) in &base.pairs {
        let alt = &other.pairs[key];
        // fits at t ≤ cut use rows ≤ cut and realize at ≤ cut + 1
        let last_fit = cut - (ws - 1);
        for d in 0..=last_fit {
            assert_eq!(pair.weight_path.row(d), alt.weight_path.row(d), "{key:?} day {d}");
            assert_eq!(pair.oos_returns[d], alt.oos_returns[d]);
        }
    }
}

#[test]
fn ew_return_is_cross_sectional_mean() {
    let d = data(2);
    let ws = 40;
    let res = run_rolling_backtest(&d.returns, &d.caps, &config(&d, ws, DayMode::Sequential)).unwrap();
    for b in 1..=4 {
        let pair = res.get(b, StrategyId::EquallyWeighted).unwrap();
        let cols: Vec<usize> = pair.assets.iter().map(|a| d.returns.assets.iter().position(|x| x == a).unwrap()).collect();
        for (i, r) in pair.oos_returns.iter().enumerate() {
            let row = d.returns.values.row(ws + i);
            let mean = cols.iter().map(|&c| row[c]).sum::<f64>() / cols.len() as f64;
            assert!((r - mean).abs() <= 1e-15, "bucket {b} day {i}");
        }
    }
}

#[test]
fn weight_rows_are_simplex_vectors() {
    let d = data(3);
    let res = run_rolling_backtest(&d.returns, &d.caps, &config(&d, 30, DayMode::Sequential)).unwrap();
    assert_eq!(res.m, 230);
    for pair in res.pairs.values() {
        assert_eq!(pair.weight_path.len_of(Axis(0)), pair.m());
        for row in pair.weight_path.rows() {
            WeightVector::new(row.to_vec()).unwrap();
        }
    }
}

#[test]
fn sequential_and_parallel_days_agree() {
    let d = data(4);
    let seq = run_rolling_backtest(&d.returns, &d.caps, &config(&d, 50, DayMode::Sequential)).unwrap();
    let par = run_rolling_backtest(&d.returns, &d.caps, &config(&d, 50, DayMode::Parallel)).unwrap();
    for (key, a) in &seq.pairs {
        let b = &par.pairs[key];
        for (x, y) in a.oos_returns.iter().zip(&b.oos_returns) {
            assert!((x - y).abs() <= 1e-9, "{key:?} {x} {y} nc {} {}", a.non_converged_days, b.non_converged_days);
        }
    }
}

#[test]
fn pipeline_writes_one_metrics_row_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(&SyntheticSpec::default());
    d.returns.write_csv(&dir.path().join("returns.csv")).unwrap();
    d.caps.write_csv(&dir.path().join("caps.csv")).unwrap();
    d.scores.write_csv(&dir.path().join("scores.csv")).unwrap();
    let text = "returns = returns.csv\nscores = scores.csv\ncaps = caps.csv\nws = 170\nseed = 1\nresamples = 299\nout_dir = out\n";
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(&cfg_path, text).unwrap();
    let cfg = RunConfig::from_file(&cfg_path).unwrap();
    let (files, tables) = run_pipeline(&cfg).unwrap();
    assert_eq!(tables[&170].rows.len(), 21);
    let csv = std::fs::read_to_string(metrics_path(&dir.path().join("out"), 170)).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert!(files.iter().all(|f| f.exists()));
    for s in StrategyId::ALL {
        let svg = std::fs::read_to_string(dir.path().join(format!("out/wealth_ws170_{s}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 7);
    }
}
