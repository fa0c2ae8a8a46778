//! Property tests over randomly generated inputs.

use ndarray::Array2;
use proptest::prelude::*;

use scorebucket::covariance::{estimate_covariance, sample_covariance};
use scorebucket::data::{parse_return_panel, ReturnPanel};
use scorebucket::descriptives::compute_descriptives;
use scorebucket::optimizer::{solve, SolverConfig};
use scorebucket::synthetic::business_days;
use scorebucket::{
    assign_buckets, oos_variance, sharpe, sharpe_diff_test, var95, variance_diff_test, CovarianceMatrix,
    ScoreVector, TestParams, WeightVector,
};

fn panel_from(values: Array2<f64>) -> ReturnPanel {
    let (t, n) = values.dim();
    let dates = business_days(chrono::NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(), t);
    let assets = (0..n).map(|i| format!("S{i}")).collect();
    ReturnPanel::new(dates, assets, values).unwrap()
}

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Array2<f64>> {
    (rows, cols).prop_flat_map(|(t, n)| {
        prop::collection::vec(-0.1f64..0.1, t * n).prop_map(move |v| Array2::from_shape_vec((t, n), v).unwrap())
    })
}

fn scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..100.0, 1 => (1u32..5).prop_map(f64::from)], 2..120)
        .prop_map(|mut v| {
            v[0] = 0.0;
            v
        })
}

fn score_vector(scores: &[f64]) -> ScoreVector {
    ScoreVector::new((0..scores.len()).map(|i| format!("X{i:03}")).collect(), scores.to_vec()).unwrap()
}

fn pd_matrix() -> impl Strategy<Value = CovarianceMatrix> {
    (1usize..=8).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            let a = Array2::from_shape_vec((n, n), v).unwrap();
            let mut s = a.dot(&a.t());
            for i in 0..n {
                s[[i, i]] += 0.05;
            }
            let s = (&s + &s.t()) / 2.0;
            CovarianceMatrix::try_new(s).unwrap()
        })
    })
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.05f64..0.05, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn return_panel_csv_round_trip(values in matrix(2..30, 2..8)) {
        let panel = panel_from(values);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        panel.write_csv(&path).unwrap();
        let back = parse_return_panel(std::fs::File::open(&path).unwrap()).unwrap();
        prop_assert_eq!(back, panel);
    }

    #[test]
    fn descriptives_scale_with_returns(values in matrix(5..60, 2..6), c in 0.1f64..10.0) {
        let base = compute_descriptives(&panel_from(values.clone()), 252).unwrap();
        let scaled = compute_descriptives(&panel_from(&values * c), 252).unwrap();
        prop_assert!((scaled.mean_annualized - c * base.mean_annualized).abs() <= 1e-10 * (1.0 + base.mean_annualized.abs() * c));
        prop_assert!((scaled.sd_annualized - c * base.sd_annualized).abs() <= 1e-10 * (1.0 + base.sd_annualized * c));
        if let (Some(a), Some(b)) = (base.skewness, scaled.skewness) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
        if let (Some(a), Some(b)) = (base.excess_kurtosis, scaled.excess_kurtosis) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn descriptives_ignore_asset_order(values in matrix(5..40, 2..6)) {
        let n = values.ncols();
        let reversed = values.select(ndarray::Axis(1), &(0..n).rev().collect::<Vec<_>>());
        let a = compute_descriptives(&panel_from(values), 252).unwrap();
        let b = compute_descriptives(&panel_from(reversed), 252).unwrap();
        prop_assert!((a.mean_annualized - b.mean_annualized).abs() <= 1e-12);
        prop_assert!((a.sd_annualized - b.sd_annualized).abs() <= 1e-12);
    }

    #[test]
    fn buckets_partition_the_universe(s in scores(), k in 1usize..8) {
        let sv = score_vector(&s);
        let positive = s.iter().filter(|&&x| x > 0.0).count();
        match assign_buckets(&sv, k, false) {
            Ok(a) => {
                let mut all: Vec<&String> = a.buckets.iter().flat_map(|b| &b.assets).collect();
                prop_assert_eq!(all.len(), s.len());
                all.sort();
                all.dedup();
                prop_assert_eq!(all.len(), s.len());
                if positive % k == 0 {
                    prop_assert!(a.buckets[1..].iter().all(|b| b.len() == positive / k));
                }
            }
            Err(_) => prop_assert!(positive < k),
        }
    }

    #[test]
    fn buckets_depend_only_on_score_ranks(s in scores(), k in 1usize..6) {
        let transformed: Vec<f64> = s.iter().map(|&x| if x > 0.0 { (x.ln() + 5.0) * 3.0 } else { 0.0 }).collect();
        let a = assign_buckets(&score_vector(&s), k, false);
        let b = assign_buckets(&score_vector(&transformed), k, false);
        if let (Ok(a), Ok(b)) = (a, b) {
            let ids = |x: &scorebucket::BucketAssignment| x.buckets.iter().map(|b| b.assets.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&a), ids(&b));
        }
    }

    #[test]
    fn buckets_ignore_input_order(s in scores(), k in 1usize..6, rot in 0usize..120) {
        let sv = score_vector(&s);
        let n = s.len();
        let r = rot % n;
        let order: Vec<usize> = (0..n).map(|i| (i + r) % n).collect();
        let shuffled = ScoreVector::new(
            order.iter().map(|&i| sv.assets[i].clone()).collect(),
            order.iter().map(|&i| s[i]).collect(),
        ).unwrap();
        if let (Ok(a), Ok(b)) = (assign_buckets(&sv, k, false), assign_buckets(&shuffled, k, false)) {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn covariance_matches_two_pass(values in matrix(2..40, 1..6)) {
        let s = sample_covariance(values.view());
        let t = values.nrows() as f64;
        for i in 0..values.ncols() {
            for j in 0..values.ncols() {
                let mi = values.column(i).sum() / t;
                let mj = values.column(j).sum() / t;
                let c: f64 = values.column(i).iter().zip(values.column(j)).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>() / (t - 1.0);
                prop_assert!((s[[i, j]] - c).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn covariance_scales_quadratically(values in matrix(2..40, 1..6), c in 0.1f64..10.0) {
        let a = sample_covariance(values.view());
        let b = sample_covariance((&values * c).view());
        for (x, y) in a.iter().zip(b.iter()) {
            prop_assert!((y - c * c * x).abs() <= 1e-12 * (1.0 + (c * c * x).abs()));
        }
    }

    #[test]
    fn estimated_covariance_is_certified(values in matrix(2..30, 1..40)) {
        if let Ok(sigma) = estimate_covariance(values.view(), 1e-8) {
            prop_assert!(CovarianceMatrix::try_new(sigma.values().clone()).is_ok());
        }
    }

    #[test]
    fn solver_is_scale_invariant(sigma in pd_matrix(), c in 1e-3f64..1e3) {
        let cfg = SolverConfig::default();
        let w = solve(&sigma, &cfg, None).weights.into_vec();
        let scaled = CovarianceMatrix::try_new(sigma.values() * c).unwrap();
        let v = solve(&scaled, &cfg, None).weights.into_vec();
        for (a, b) in w.iter().zip(&v) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn solver_beats_equal_weights(sigma in pd_matrix()) {
        let sol = solve(&sigma, &SolverConfig::default(), None);
        let n = sigma.dim();
        prop_assert!(WeightVector::new(sol.weights.as_slice().to_vec()).is_ok());
        let ew = vec![1.0 / n as f64; n];
        prop_assert!(sigma.quadratic_form(sol.weights.as_slice()) <= sigma.quadratic_form(&ew) + 1e-12);
    }

    #[test]
    fn solver_stays_feasible_under_iteration_cap(sigma in pd_matrix(), cap in 1usize..4) {
        let sol = solve(&sigma, &SolverConfig { tol: 1e-8, max_iter: cap }, None);
        prop_assert!(WeightVector::new(sol.weights.into_vec()).is_ok());
    }

    #[test]
    fn sharpe_ignores_scale(x in series(3..200), c in 0.01f64..100.0) {
        prop_assume!(oos_variance(&x).unwrap() > 1e-12);
        let y: Vec<f64> = x.iter().map(|v| v * c).collect();
        let (a, b) = (sharpe(&x).unwrap(), sharpe(&y).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn variance_ignores_shift(x in series(3..200), shift in -0.05f64..0.05) {
        let y: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let (a, b) = (oos_variance(&x).unwrap(), oos_variance(&y).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn var95_below_median(x in series(20..300)) {
        let mut s = x.clone();
        s.sort_by(f64::total_cmp);
        let h = (s.len() - 1) as f64 * 0.5;
        let lo = h.floor() as usize;
        let median = s[lo] + (h - lo as f64) * (s[(lo + 1).min(s.len() - 1)] - s[lo]);
        prop_assert!(var95(&x).unwrap() <= median);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn tests_are_antisymmetric(a in series(50..150), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().rev().map(|v| v * 0.7 + 0.001).collect();
        prop_assume!(oos_variance(&a).unwrap() > 1e-10);
        let p = TestParams { block_length: 5, resamples: 199, seed };
        for f in [sharpe_diff_test, variance_diff_test] {
            let ab = f(&a, &b, &p).unwrap();
            let ba = f(&b, &a, &p).unwrap();
            prop_assert_eq!(ab.statistic, -ba.statistic);
            prop_assert_eq!(ab.p_value, ba.p_value);
        }
    }

    #[test]
    fn tests_ignore_common_scaling(a in series(50..150), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().rev().map(|v| v * 0.5 - 0.002).collect();
        prop_assume!(oos_variance(&a).unwrap() > 1e-10);
        let p = TestParams { block_length: 5, resamples: 199, seed };
        let a2: Vec<f64> = a.iter().map(|v| v * 2.0).collect();
        let b2: Vec<f64> = b.iter().map(|v| v * 2.0).collect();
        for f in [sharpe_diff_test, variance_diff_test] {
            let base = f(&a, &b, &p).unwrap();
            let scaled = f(&a2, &b2, &p).unwrap();
            prop_assert!((base.statistic - scaled.statistic).abs() <= 1e-9 * (1.0 + base.statistic.abs()));
            prop_assert_eq!(base.p_value, scaled.p_value);
        }
    }

    #[test]
    fn tests_are_reproducible(a in series(50..150), seed in any::<u64>()) {
        let b: Vec<f64> = a.iter().rev().copied().collect();
        prop_assume!(oos_variance(&a).unwrap() > 1e-10 && a != b);
        let p = TestParams { block_length: 5, resamples: 199, seed };
        for f in [sharpe_diff_test, variance_diff_test] {
            let x = f(&a, &b, &p).unwrap();
            let y = f(&a, &b, &p).unwrap();
            prop_assert_eq!(x.p_value.to_bits(), y.p_value.to_bits());
            prop_assert_eq!(x.statistic.to_bits(), y.statistic.to_bits());
        }
    }
}
