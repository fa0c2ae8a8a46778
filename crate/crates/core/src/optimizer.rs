//! Long-only minimum-variance weights: min wᵀΣw subject to 1ᵀw = 1, w ≥ 0.
//!
//! The upper bound w ≤ 1 is implied by the other two constraints and is not
//! handled separately.
//!
//! Solved with a primal active-set method. Each iteration solves the
//! equality-constrained problem on the current free set F,
//!
//! ```text
//!     v_F = Σ_FF⁻¹ 1 / (1ᵀ Σ_FF⁻¹ 1),   v_i = 0 for i ∉ F,
//! ```
//!
//! and either steps towards `v` until a weight hits zero (dropping it from F)
//! or, if `v` is feasible, adds the bound variable with the most negative
//! multiplier (Σw)_j − λ. Termination is certified by the KKT residual.

use thiserror::Error;

use crate::covariance::CovarianceMatrix;
use crate::linalg::{cholesky, cholesky_solve};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    #[error("optimizer did not converge in {iterations} iterations (KKT residual {kkt_residual:e})")]
    NotConverged { iterations: usize, kkt_residual: f64 },
    #[error("bad optimizer input: {0}")]
    BadInput(String),
}

/// Long-only weights summing to one, positional with respect to the caller's
/// asset list.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts weights in [0, 1] (to 1e-10) that sum to 1 (to 1e-10).
    pub fn new(weights: Vec<f64>) -> Result<Self, OptimizeError> {
        if weights.is_empty() {
            return Err(OptimizeError::BadInput("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-10 || *w > 1.0 + 1e-10) {
            return Err(OptimizeError::BadInput("weight outside [0, 1]".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(OptimizeError::BadInput(format!("weights sum to {sum}")));
        }
        Ok(Self(weights))
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Inner product with a return vector.
    pub fn dot(&self, returns: impl IntoIterator<Item = f64>) -> f64 {
        self.0.iter().zip(returns).map(|(w, r)| w * r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub kkt_residual: f64,
    /// wᵀΣw
    pub objective: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER }
    }
}

/// Result of a solve that always carries feasible weights, even when the
/// iteration cap was hit.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: WeightVector,
    pub diagnostics: SolveDiagnostics,
}

impl Solution {
    /// Converts a capped solve into [`OptimizeError::NotConverged`].
    pub fn into_result(self) -> Result<(WeightVector, SolveDiagnostics), OptimizeError> {
        match self.diagnostics.status {
            SolveStatus::Optimal => Ok((self.weights, self.diagnostics)),
            SolveStatus::MaxIterations => Err(OptimizeError::NotConverged {
                iterations: self.diagnostics.iterations,
                kkt_residual: self.diagnostics.kkt_residual,
            }),
        }
    }
}

/// KKT residual of a feasible `w`: the largest violation of stationarity on
/// the support, dual feasibility off it, and primal feasibility.
///
/// λ is taken as wᵀΣw, the multiplier implied by stationarity.
pub fn kkt_residual(sigma: &CovarianceMatrix, w: &[f64]) -> f64 {
    let grad = mat_vec(sigma, w);
    kkt_from_grad(&grad, w)
}

fn kkt_from_grad(grad: &[f64], w: &[f64]) -> f64 {
    let lambda: f64 = grad.iter().zip(w).map(|(g, x)| g * x).sum();
    let mut res = (w.iter().sum::<f64>() - 1.0).abs();
    for (&g, &x) in grad.iter().zip(w) {
        res = res.max((-x).max(0.0));
        let r = if x > 0.0 { (g - lambda).abs() } else { (lambda - g).max(0.0) };
        res = res.max(r);
    }
    res
}

fn mat_vec(sigma: &CovarianceMatrix, w: &[f64]) -> Vec<f64> {
    sigma.values().rows().into_iter().map(|row| row.iter().zip(w).map(|(a, b)| a * b).sum()).collect()
}

/// Solves the long-only minimum-variance problem.
///
/// `warm_start` is an optional previous solution; its support seeds the free
/// set. The optimum is unique, so warm starts change only the iteration count.
pub fn solve(sigma: &CovarianceMatrix, config: &SolverConfig, warm_start: Option<&[f64]>) -> Solution {
    let n = sigma.dim();
    if n == 1 {
        return Solution {
            weights: WeightVector(vec![1.0]),
            diagnostics: SolveDiagnostics {
                iterations: 0,
                kkt_residual: 0.0,
                objective: sigma.values()[[0, 0]],
                status: SolveStatus::Optimal,
            },
        };
    }

    let mut free: Vec<bool> = match warm_start {
        Some(w) if w.len() == n && w.iter().any(|&x| x > 0.0) => w.iter().map(|&x| x > 0.0).collect(),
        _ => vec![true; n],
    };
    let k = free.iter().filter(|&&f| f).count() as f64;
    let mut w: Vec<f64> = free.iter().map(|&f| if f { 1.0 / k } else { 0.0 }).collect();

    let values = sigma.values();
    let mut iterations = 0;
    let mut converged = false;
    let mut target = vec![0.0; n];
    while iterations < config.max_iter {
        iterations += 1;
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let m = idx.len();
        let sub = ndarray::Array2::from_shape_fn((m, m), |(a, b)| values[[idx[a], idx[b]]]);
        let Some(l) = cholesky(sub.view()) else {
            // principal submatrices of a certified PD matrix are PD; this is
            // rounding on a nearly singular input, keep the current point
            break;
        };
        let mut x = vec![1.0; m];
        cholesky_solve(&l, &mut x);
        let total: f64 = x.iter().sum();
        target.iter_mut().for_each(|t| *t = 0.0);
        for (a, &i) in idx.iter().enumerate() {
            target[i] = x[a] / total;
        }

        if idx.iter().all(|&i| target[i] >= 0.0) {
            w.copy_from_slice(&target);
            let grad = mat_vec(sigma, &w);
            let lambda: f64 = grad.iter().zip(&w).map(|(g, x)| g * x).sum();
            // relative to the objective so the support does not depend on the scale of Σ
            let pricing_tol = config.tol * lambda.min(1.0);
            let entering = (0..n)
                .filter(|&j| !free[j])
                .map(|j| (j, grad[j] - lambda))
                .filter(|&(_, d)| d < -pricing_tol)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match entering {
                Some((j, _)) => free[j] = true,
                None => {
                    converged = true;
                    break;
                }
            }
        } else {
            // step from w towards target until the first weight hits zero
            let mut alpha = 1.0;
            let mut blocking = None;
            for &i in &idx {
                if target[i] < 0.0 {
                    let step = w[i] / (w[i] - target[i]);
                    if step < alpha {
                        alpha = step;
                        blocking = Some(i);
                    }
                }
            }
            for &i in &idx {
                w[i] += alpha * (target[i] - w[i]);
            }
            if let Some(b) = blocking {
                w[b] = 0.0;
                free[b] = false;
            }
            for &i in &idx {
                if w[i] <= 0.0 {
                    w[i] = 0.0;
                    free[i] = false;
                }
            }
            if !free.iter().any(|&f| f) {
                // cannot happen for a feasible iterate; restart from the support of target
                for &i in &idx {
                    free[i] = target[i] > 0.0;
                }
            }
            renormalize(&mut w);
        }
    }

    renormalize(&mut w);
    let grad = mat_vec(sigma, &w);
    let kkt = kkt_from_grad(&grad, &w);
    let objective: f64 = grad.iter().zip(&w).map(|(g, x)| g * x).sum();
    let status = if converged || kkt <= config.tol { SolveStatus::Optimal } else { SolveStatus::MaxIterations };
    Solution {
        weights: WeightVector(w),
        diagnostics: SolveDiagnostics { iterations, kkt_residual: kkt, objective, status },
    }
}

/// Convenience wrapper returning [`OptimizeError::NotConverged`] when the
/// iteration cap is reached.
pub fn solve_min_variance(
    sigma: &CovarianceMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<(WeightVector, SolveDiagnostics), OptimizeError> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(OptimizeError::BadInput("tol and max_iter must be positive".into()));
    }
    solve(sigma, &SolverConfig { tol, max_iter }, None).into_result()
}

fn renormalize(w: &mut [f64]) {
    for x in w.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|x| *x /= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    fn cov(m: Array2<f64>) -> CovarianceMatrix {
        CovarianceMatrix::try_new(m).unwrap()
    }

    #[test]
    fn identity_gives_equal_weights() {
        let (w, d) = solve_min_variance(&cov(Array2::eye(4)), 1e-8, 10_000).unwrap();
        for x in w.as_slice() {
            assert!((x - 0.25).abs() < 1e-12);
        }
        assert!((d.objective - 0.25).abs() < 1e-12);
        assert_eq!(d.status, SolveStatus::Optimal);
    }

    #[test]
    fn inverse_variance_interior() {
        let (w, d) = solve_min_variance(&cov(array![[0.04, 0.0], [0.0, 0.01]]), 1e-8, 10_000).unwrap();
        assert!((w.as_slice()[0] - 0.2).abs() < 1e-12);
        assert!((w.as_slice()[1] - 0.8).abs() < 1e-12);
        assert!(d.kkt_residual <= 1e-8);
    }

    #[test]
    fn indefinite_input_rejected() {
        // det < 0: not a covariance matrix, never reaches the solver
        assert!(CovarianceMatrix::try_new(array![[0.04, 0.039], [0.039, 0.01]]).is_err());
    }

    #[test]
    fn corner_solution() {
        // PD, and the unconstrained minimizer Σ⁻¹1 ∝ (−0.005, 0.025) shorts asset 1
        let sigma = cov(array![[0.04, 0.015], [0.015, 0.01]]);
        let (w, d) = solve_min_variance(&sigma, 1e-8, 10_000).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 1.0]);
        // brute force over w1 ∈ [0, 1] at step 1e-6
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=1_000_000 {
            let w1 = i as f64 * 1e-6;
            let f = sigma.quadratic_form(&[w1, 1.0 - w1]);
            if f < best.0 {
                best = (f, w1);
            }
        }
        assert_eq!(best.1, 0.0);
        assert!((d.objective - best.0).abs() < 1e-15);
    }

    #[test]
    fn single_asset() {
        let (w, _) = solve_min_variance(&cov(array![[0.3]]), 1e-8, 10).unwrap();
        assert_eq!(w.as_slice(), &[1.0]);
    }

    #[test]
    fn warm_start_from_wrong_support() {
        let sigma = cov(array![[0.04, 0.0, 0.0], [0.0, 0.01, 0.0], [0.0, 0.0, 0.02]]);
        let cold = solve(&sigma, &SolverConfig::default(), None);
        let warm = solve(&sigma, &SolverConfig::default(), Some(&[1.0, 0.0, 0.0]));
        for (a, b) in cold.weights.as_slice().iter().zip(warm.weights.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn iteration_cap_still_feasible() {
        let sigma = cov(array![[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 5.0]]);
        let s = solve(&sigma, &SolverConfig { tol: 1e-8, max_iter: 1 }, Some(&[0.0, 0.0, 1.0]));
        let w = s.weights.as_slice();
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.diagnostics.status, SolveStatus::MaxIterations);
        assert!(matches!(s.into_result(), Err(OptimizeError::NotConverged { .. })));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.6, 0.5]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
    }
}
