//! Least squares, ridge and lasso with an unpenalised intercept.
//!
//! Features and target are centred first; the intercept is recovered as
//! `mean(y) - mean(x) . coef`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{PredictorError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearModel {
    pub fn predict_row(&self, row: impl Iterator<Item = f64>) -> f64 {
        self.intercept + row.zip(&self.coef).map(|(x, c)| x * c).sum::<f64>()
    }
}

struct Centered {
    x: DMatrix<f64>,
    y: DVector<f64>,
    x_mean: DVector<f64>,
    y_mean: f64,
}

fn center(x: &DMatrix<f64>, y: &[f64]) -> Centered {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = y.iter().sum::<f64>() / n;
    let xc = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - x_mean[j]);
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - y_mean));
    Centered {
        x: xc,
        y: yc,
        x_mean,
        y_mean,
    }
}

fn finish(c: &Centered, coef: DVector<f64>) -> Result<LinearModel> {
    if coef.iter().any(|v| !v.is_finite()) {
        return Err(PredictorError::Numerical("non-finite coefficients".into()));
    }
    let intercept = c.y_mean - c.x_mean.dot(&coef);
    Ok(LinearModel {
        intercept,
        coef: coef.iter().copied().collect(),
    })
}

/// Ridge regression; `lambda = 0` is ordinary least squares.
///
/// Solves the normal equations `(XᵀX + λI) β = Xᵀy` by Cholesky. When the
/// Gram matrix is singular (rank-deficient X with λ = 0) the minimum-norm
/// solution from the pseudo-inverse is used instead.
pub fn fit_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LinearModel> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(PredictorError::Hyperparameter(format!("ridge lambda {lambda}")));
    }
    let c = center(x, y);
    let xt = c.x.transpose();
    let mut gram = &xt * &c.x;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = &xt * &c.y;
    let coef = match gram.clone().cholesky().filter(well_conditioned) {
        Some(chol) => chol.solve(&rhs),
        None => {
            let eps = 1e-12 * gram.amax().max(1.0);
            let pinv = gram
                .pseudo_inverse(eps)
                .map_err(|e| PredictorError::Numerical(e.to_string()))?;
            pinv * rhs
        }
    };
    finish(&c, coef)
}

/// Cheap rank check on the Cholesky factor's diagonal.
fn well_conditioned(chol: &Cholesky<f64, Dyn>) -> bool {
    let l = chol.l();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)]).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    diag.is_empty() || (max > 0.0 && min / max > 1e-7)
}

/// Lasso by cyclic coordinate descent on
/// `(1 / 2n) ||y - Xβ||² + α ||β||₁`.
pub fn fit_lasso(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LinearModel> {
    if alpha.is_nan() || alpha < 0.0 {
        return Err(PredictorError::Hyperparameter(format!("lasso alpha {alpha}")));
    }
    let c = center(x, y);
    let n = x.nrows() as f64;
    let p = x.ncols();
    let col_sq: Vec<f64> = c.x.column_iter().map(|col| col.norm_squared() / n).collect();
    let mut coef = DVector::zeros(p);
    let mut residual = c.y.clone();
    for _ in 0..max_iter {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let col = c.x.column(j);
            let old = coef[j];
            let rho = col.dot(&residual) / n + col_sq[j] * old;
            let new = soft_threshold(rho, alpha) / col_sq[j];
            if new != old {
                residual.axpy(old - new, &col, 1.0);
                coef[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        if max_delta < tol {
            break;
        }
    }
    finish(&c, coef)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}
