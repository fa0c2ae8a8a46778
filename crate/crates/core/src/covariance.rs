//! Sample covariance of a return window with a minimal ridge when the
//! estimate is not positive definite (e.g. fewer observations than assets).

use ndarray::{Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::linalg::cholesky;

pub const DEFAULT_RIDGE_SCALE: f64 = 1e-8;
/// Number of ×10 escalations after the first ridge attempt.
pub const MAX_RIDGE_ESCALATIONS: u32 = 8;

#[derive(Debug, Error, PartialEq)]
pub enum CovarianceError {
    #[error("window needs at least 2 rows and 1 column, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("degenerate window: covariance trace is {0}")]
    DegenerateWindow(f64),
    #[error("covariance not positive definite after ridge of {ridge}")]
    NotPositiveDefinite { ridge: f64 },
    #[error("ridge scale must be finite and non-negative")]
    BadRidgeScale,
    #[error("matrix is not square and symmetric")]
    NotSymmetric,
}

/// A symmetric positive-definite covariance matrix. Values are positional:
/// row/column `i` belongs to the caller's `i`-th asset.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    values: Array2<f64>,
    regularization: f64,
}

impl CovarianceMatrix {
    /// Wraps an externally supplied matrix, certifying symmetry and positive
    /// definiteness. No regularization is applied.
    pub fn try_new(values: Array2<f64>) -> Result<Self, CovarianceError> {
        let n = values.nrows();
        if n == 0 || values.ncols() != n {
            return Err(CovarianceError::NotSymmetric);
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (values[[i, j]], values[[j, i]]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()) {
                    return Err(CovarianceError::NotSymmetric);
                }
            }
        }
        if cholesky(values.view()).is_none() {
            return Err(CovarianceError::NotPositiveDefinite { ridge: 0.0 });
        }
        Ok(Self { values, regularization: 0.0 })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Ridge actually added to the diagonal.
    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    /// wᵀΣw
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for i in 0..n {
            let row = self.values.row(i);
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * w[j];
            }
            total += w[i] * s;
        }
        total
    }
}

/// Unregularized two-pass sample covariance with denominator T−1.
pub fn sample_covariance(window: ArrayView2<'_, f64>) -> Array2<f64> {
    let t = window.nrows();
    let mean = window.mean_axis(Axis(0)).expect("non-empty window");
    let centered = &window - &mean;
    let mut s = centered.t().dot(&centered);
    s /= (t - 1) as f64;
    let n = s.nrows();
    for i in 0..n {
        for j in 0..i {
            s[[j, i]] = s[[i, j]];
        }
    }
    s
}

/// Sample covariance of `window` (rows = days, columns = assets).
///
/// If the estimate fails the positive-definiteness certificate, δ·I is added
/// with δ = `ridge_scale`·trace/n, multiplied by 10 until the certificate
/// passes or [`MAX_RIDGE_ESCALATIONS`] escalations have been tried.
pub fn estimate_covariance(
    window: ArrayView2<'_, f64>,
    ridge_scale: f64,
) -> Result<CovarianceMatrix, CovarianceError> {
    let (rows, cols) = window.dim();
    if rows < 2 || cols < 1 {
        return Err(CovarianceError::TooSmall { rows, cols });
    }
    if !ridge_scale.is_finite() || ridge_scale < 0.0 {
        return Err(CovarianceError::BadRidgeScale);
    }
    let s = sample_covariance(window);
    let trace = s.diag().sum();
    if !(trace > 0.0) {
        return Err(CovarianceError::DegenerateWindow(trace));
    }
    if cholesky(s.view()).is_some() {
        return Ok(CovarianceMatrix { values: s, regularization: 0.0 });
    }
    let mut delta = ridge_scale * trace / cols as f64;
    if delta == 0.0 {
        return Err(CovarianceError::NotPositiveDefinite { ridge: 0.0 });
    }
    let mut reg = s;
    for attempt in 0..=MAX_RIDGE_ESCALATIONS {
        let prev = if attempt == 0 { 0.0 } else { delta / 10.0 };
        for i in 0..cols {
            reg[[i, i]] += delta - prev;
        }
        if cholesky(reg.view()).is_some() {
            return Ok(CovarianceMatrix { values: reg, regularization: delta });
        }
        if attempt < MAX_RIDGE_ESCALATIONS {
            delta *= 10.0;
        }
    }
    Err(CovarianceError::NotPositiveDefinite { ridge: delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Textbook two-pass covariance, entry by entry.
    fn oracle(w: &Array2<f64>, i: usize, j: usize) -> f64 {
        let t = w.nrows() as f64;
        let mi = w.column(i).sum() / t;
        let mj = w.column(j).sum() / t;
        w.column(i).iter().zip(w.column(j)).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>()
            / (t - 1.0)
    }

    #[test]
    fn collinear_columns_get_minimal_ridge() {
        let w = array![[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]] * 1e-2;
        let c = estimate_covariance(w.view(), 1e-8).unwrap();
        // raw estimate [[1,2],[2,4]]·1e-4, trace 5e-4, so δ0 = 1e-8·2.5e-4
        let raw = sample_covariance(w.view());
        assert!((raw[[0, 0]] - 1e-4).abs() < 1e-18);
        assert!((raw[[0, 1]] - 2e-4).abs() < 1e-18);
        assert!((raw[[1, 1]] - 4e-4).abs() < 1e-18);
        let delta0 = 1e-8 * 2.5e-4;
        assert!(c.regularization() >= delta0 * 0.999);
        assert!(c.regularization() <= delta0 * 1e8);
        assert!(cholesky(c.values().view()).is_some());
    }

    #[test]
    fn uncorrelated_columns_exact_diagonal() {
        // column 0: ±0.2 deviations, column 1: ±0.1, orthogonal sign patterns
        let w = array![[0.2, 0.1], [-0.2, 0.1], [0.2, -0.1], [-0.2, -0.1]];
        let c = estimate_covariance(w.view(), 1e-8).unwrap();
        assert_eq!(c.regularization(), 0.0);
        let v = c.values();
        // 4 obs: Σd² = 0.16 and 0.04, denominator 3
        let expect = [[0.16 / 3.0, 0.0], [0.0, 0.04 / 3.0]];
        assert!((v[[0, 0]] - expect[0][0]).abs() < 1e-15);
        assert!((v[[1, 1]] - expect[1][1]).abs() < 1e-15);
        assert!(v[[0, 1]].abs() < 1e-18);
        for i in 0..2 {
            for j in 0..2 {
                assert!((v[[i, j]] - oracle(&w, i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn variances_point04_and_point01() {
        // deviations ±a, ±b in orthogonal patterns, scaled so s² = 0.04 and 0.01 with T−1 = 3
        let a = (0.04f64 * 3.0 / 4.0).sqrt();
        let b = (0.01f64 * 3.0 / 4.0).sqrt();
        let w = array![[a, b], [-a, b], [a, -b], [-a, -b]];
        let c = estimate_covariance(w.view(), 1e-8).unwrap();
        assert_eq!(c.regularization(), 0.0);
        assert!((c.values()[[0, 0]] - 0.04).abs() < 1e-15);
        assert!((c.values()[[1, 1]] - 0.01).abs() < 1e-15);
        assert!(c.values()[[0, 1]].abs() < 1e-18);
    }

    #[test]
    fn single_asset_is_variance() {
        let w = array![[0.01], [0.03], [-0.02], [0.0]];
        let c = estimate_covariance(w.view(), 1e-8).unwrap();
        assert!((c.values()[[0, 0]] - oracle(&w, 0, 0)).abs() < 1e-18);
    }

    #[test]
    fn constant_window_is_degenerate() {
        let w = Array2::from_elem((5, 3), 0.01);
        assert!(matches!(
            estimate_covariance(w.view(), 1e-8),
            Err(CovarianceError::DegenerateWindow(_))
        ));
    }

    #[test]
    fn too_small() {
        let w = Array2::<f64>::zeros((1, 3));
        assert!(matches!(estimate_covariance(w.view(), 1e-8), Err(CovarianceError::TooSmall { .. })));
    }

    #[test]
    fn try_new_rejects_indefinite() {
        assert!(CovarianceMatrix::try_new(array![[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(CovarianceMatrix::try_new(array![[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(CovarianceMatrix::try_new(array![[1.0, 0.5], [0.5, 1.0]]).is_ok());
    }
}
