//! Ridge regression with an unpenalized intercept.
//!
//! Features and targets are centered, then the penalized normal equations are
//! solved through an eigendecomposition of whichever of the covariance
//! (`d × d`) or Gram (`N × N`) matrix is smaller. The decomposition is computed
//! once per design matrix, so sweeping many regularization strengths costs one
//! matrix-vector product per strength.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};

/// A fitted linear readout `y ≈ X·w + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub r2_train: f64,
    pub r2_val: Option<f64>,
    pub r2_test: Option<f64>,
}

impl RidgeFit {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        ensure_dim(self.weights.len(), x.ncols())?;
        let w = DVector::from_column_slice(&self.weights);
        Ok((x * w).iter().map(|v| v + self.bias).collect())
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        ensure_dim(self.weights.len(), row.len())?;
        Ok(row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
    }

    /// Test-set R² on `(x, y)`, recorded into the fit.
    pub fn score_test(&mut self, x: &DMatrix<f64>, y: &[f64]) -> Result<f64> {
        let pred = self.predict(x)?;
        let r2 = r_squared(y, &pred);
        self.r2_test = Some(r2);
        Ok(r2)
    }
}

/// Coefficient of determination. A constant target scores 1 when predicted
/// exactly and 0 otherwise.
pub fn r_squared(y: &[f64], pred: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res <= f64::EPSILON { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

enum Basis {
    /// `w = V diag(1/(s+λ)) Vᵀ Xcᵀ yc`; stores `V` and `Vᵀ Xcᵀ yc`.
    Primal { v: DMatrix<f64>, proj: DVector<f64> },
    /// `w = Xcᵀ U diag(1/(s+λ)) Uᵀ yc`; stores `Xcᵀ U` and `Uᵀ yc`.
    Dual { xt_u: DMatrix<f64>, proj: DVector<f64> },
}

/// Precomputed decomposition for repeated ridge solves on one design matrix.
pub struct RidgeSolver {
    x_mean: DVector<f64>,
    y_mean: f64,
    eigvals: Vec<f64>,
    keep: Vec<bool>,
    basis: Basis,
    constant_target: bool,
}

impl RidgeSolver {
    pub fn new(x: &DMatrix<f64>, y: &[f64]) -> Result<Self> {
        let (n, d) = x.shape();
        ensure_dim(n, y.len())?;
        if n < 2 {
            return Err(Error::invalid(format!("ridge needs at least 2 rows, got {n}")));
        }
        if d == 0 {
            return Err(Error::invalid("ridge needs at least one feature"));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::invalid("ridge inputs must be finite"));
        }

        let x_mean = x.row_mean().transpose();
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let mut xc = x.clone();
        for mut row in xc.row_iter_mut() {
            row -= x_mean.transpose();
        }
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let constant_target = y.iter().all(|v| *v == y[0]);

        let (eigvals, basis) = if d <= n {
            let cov = xc.transpose() * &xc;
            let eig = SymmetricEigen::new(cov);
            let proj = eig.eigenvectors.transpose() * (xc.transpose() * &yc);
            (
                eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
                Basis::Primal {
                    v: eig.eigenvectors,
                    proj,
                },
            )
        } else {
            let gram = &xc * xc.transpose();
            let eig = SymmetricEigen::new(gram);
            let proj = eig.eigenvectors.transpose() * &yc;
            let xt_u = xc.transpose() * &eig.eigenvectors;
            (
                eig.eigenvalues.iter().copied().collect::<Vec<_>>(),
                Basis::Dual { xt_u, proj },
            )
        };

        // Eigen-directions at round-off level carry no signal; dropping them
        // gives the minimum-norm solution at λ = 0 and keeps small λ stable.
        let max_ev = eigvals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = max_ev * 1e-12 * (n.max(d) as f64);
        let keep = eigvals.iter().map(|&s| s > tol && max_ev > 0.0).collect();

        Ok(Self {
            x_mean,
            y_mean,
            eigvals,
            keep,
            basis,
            constant_target,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_mean.len()
    }

    /// Weights and bias for one regularization strength.
    pub fn solve(&self, lambda: f64) -> Result<(Vec<f64>, f64)> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if self.constant_target {
            return Ok((vec![0.0; self.dim()], self.y_mean));
        }
        let scale = |i: usize| {
            if self.keep[i] {
                1.0 / (self.eigvals[i] + lambda)
            } else {
                0.0
            }
        };
        let w = match &self.basis {
            Basis::Primal { v, proj } => {
                let coef = DVector::from_fn(proj.len(), |i, _| proj[i] * scale(i));
                v * coef
            }
            Basis::Dual { xt_u, proj } => {
                let coef = DVector::from_fn(proj.len(), |i, _| proj[i] * scale(i));
                xt_u * coef
            }
        };
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("ridge solve produced non-finite weights"));
        }
        let bias = self.y_mean - self.x_mean.dot(&w);
        Ok((w.iter().copied().collect(), bias))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )))
    }
}

/// Minimizes `‖y − Xw − b‖² + λ‖w‖²`.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    let solver = RidgeSolver::new(x, y)?;
    let (weights, bias) = solver.solve(lambda)?;
    let mut fit = RidgeFit {
        weights,
        bias,
        lambda,
        r2_train: 0.0,
        r2_val: None,
        r2_test: None,
    };
    fit.r2_train = r_squared(y, &fit.predict(x)?);
    Ok(fit)
}

/// Validation R² differences at or below this are ties.
const TIE_TOLERANCE: f64 = 1e-12;

/// Fits every `lambda` on the training rows and keeps the one with the best
/// validation R², preferring the larger `lambda` on ties.
pub fn sweep_ridge(
    x_train: &DMatrix<f64>,
    y_train: &[f64],
    x_val: &DMatrix<f64>,
    y_val: &[f64],
    lambdas: &[f64],
) -> Result<RidgeFit> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    for &l in lambdas {
        check_lambda(l)?;
    }
    ensure_dim(x_train.ncols(), x_val.ncols())?;
    ensure_dim(x_val.nrows(), y_val.len())?;
    if y_val.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let solver = RidgeSolver::new(x_train, y_train)?;

    let mut best: Option<(f64, f64, Vec<f64>, f64)> = None;
    for &lambda in lambdas {
        let (w, b) = solver.solve(lambda)?;
        let wv = DVector::from_column_slice(&w);
        let pred: Vec<f64> = (x_val * &wv).iter().map(|v| v + b).collect();
        let r2 = r_squared(y_val, &pred);
        let better = match &best {
            None => true,
            Some((best_r2, best_lambda, _, _)) => {
                r2 > best_r2 + TIE_TOLERANCE || ((r2 - best_r2).abs() <= TIE_TOLERANCE && lambda > *best_lambda)
            }
        };
        if better {
            best = Some((r2, lambda, w, b));
        }
    }
    let (r2_val, lambda, weights, bias) = best.expect("nonempty grid");
    let mut fit = RidgeFit {
        weights,
        bias,
        lambda,
        r2_train: 0.0,
        r2_val: Some(r2_val),
        r2_test: None,
    };
    fit.r2_train = r_squared(y_train, &fit.predict(x_train)?);
    Ok(fit)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Default probe grid: 13 values from 1e-4 to 1e8.
pub fn default_lambdas() -> Vec<f64> {
    log_grid(1e-4, 1e8, 13)
}
