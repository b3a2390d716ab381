use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PredictorError, Result};

/// Per-column standardisation with population (divisor N) deviation.
///
/// Constant columns keep `std = 1` and are flagged in `constant`, so they
/// transform to zeros. Only constructible by fitting, so a transform always
/// uses fitted statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    stds: Vec<f64>,
    constant: Vec<bool>,
    fitted_rows: usize,
}

impl Standardizer {
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(PredictorError::Empty);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PredictorError::NonFinite);
        }
        let n = x.nrows() as f64;
        let mut means = Vec::with_capacity(x.ncols());
        let mut stds = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            let flat = std == 0.0 || col.iter().all(|&v| v == col[0]);
            means.push(mean);
            stds.push(if flat { 1.0 } else { std });
            constant.push(flat);
        }
        Ok(Standardizer {
            means,
            stds,
            constant,
            fitted_rows: x.nrows(),
        })
    }

    /// Fits a single-column scaler on a series.
    pub fn fit_series(values: &[f64]) -> Result<Self> {
        Self::fit(&DMatrix::from_column_slice(values.len(), 1, values))
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn stds(&self) -> &[f64] {
        &self.stds
    }

    pub fn constant(&self) -> &[bool] {
        &self.constant
    }

    /// Number of rows seen by `fit`.
    pub fn fitted_rows(&self) -> usize {
        self.fitted_rows
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.means.len() {
            return Err(PredictorError::Dimension {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.means[j]) / self.stds[j]
        }))
    }

    pub fn inverse_transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            x[(i, j)] * self.stds[j] + self.means[j]
        }))
    }

    /// Scales values of column `col`.
    pub fn scale(&self, col: usize, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|v| (v - self.means[col]) / self.stds[col])
            .collect()
    }

    pub fn unscale(&self, col: usize, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|v| v * self.stds[col] + self.means[col])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_population_std() {
        let s = Standardizer::fit_series(&[0.0, 10.0]).unwrap();
        assert_eq!(s.means(), [5.0]);
        assert_eq!(s.stds(), [5.0]);
        let t = s.transform(&DMatrix::from_element(1, 1, 10.0)).unwrap();
        assert_eq!(t[(0, 0)], 1.0);
    }

    #[test]
    fn round_trip() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, -3.0, 2.5, 8.0, 7.25, 0.5, -4.0, 2.0]);
        let s = Standardizer::fit(&x).unwrap();
        let back = s.inverse_transform(&s.transform(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_flagged() {
        let s = Standardizer::fit_series(&[7.0, 7.0, 7.0]).unwrap();
        assert_eq!(s.constant(), [true]);
        assert_eq!(s.scale(0, &[7.0, 7.0, 7.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn dimension_and_empty_errors() {
        let s = Standardizer::fit_series(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            s.transform(&DMatrix::zeros(1, 2)),
            Err(PredictorError::Dimension { expected: 1, found: 2 })
        ));
        assert!(Standardizer::fit(&DMatrix::zeros(0, 1)).is_err());
        assert!(Standardizer::fit_series(&[1.0, f64::NAN]).is_err());
    }
}
