use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{fit, rmse, select_best, Hyperparams, Model, ModelKind, PredictorError, Result, Standardizer};
use crate::telemetry::{format_number, lagged_dataset};

/// Name of the naive last-value baseline in reports.
pub const PERSISTENCE: &str = "persistence";

/// Chronological 75/25 split at `floor(0.75 N)`.
pub fn split_train_test(series: &[f64]) -> Result<(&[f64], &[f64])> {
    if series.len() < 8 {
        return Err(PredictorError::TooShort {
            len: series.len(),
            min: 8,
        });
    }
    Ok(series.split_at(series.len() * 3 / 4))
}

/// A model trained on lag windows of one series, together with the scaler
/// fitted on that training series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecaster {
    pub model: Model,
    pub scaler: Standardizer,
    pub n_lags: usize,
}

impl Forecaster {
    /// Only the training slice is visible here, so the scaler cannot see
    /// test data.
    pub fn train(kind: ModelKind, train: &[f64], n_lags: usize, hp: &Hyperparams, seed: u64) -> Result<Self> {
        let scaler = Standardizer::fit_series(train)?;
        let scaled = scaler.scale(0, train);
        let ds = lagged_dataset(&scaled, n_lags).map_err(|_| PredictorError::TooShort {
            len: train.len(),
            min: n_lags + 1,
        })?;
        let model = fit(kind, &ds.x, &ds.y, hp, seed)?;
        Ok(Forecaster { model, scaler, n_lags })
    }

    /// One-step predictions for raw windows (each of length `n_lags`), in
    /// original units and unclamped.
    pub fn predict_windows(&self, windows: &[&[f64]]) -> Result<Vec<f64>> {
        let mut x = DMatrix::zeros(windows.len(), self.n_lags);
        for (i, w) in windows.iter().enumerate() {
            if w.len() != self.n_lags {
                return Err(PredictorError::Dimension {
                    expected: self.n_lags,
                    found: w.len(),
                });
            }
            for (j, v) in self.scaler.scale(0, w).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let pred = self.model.predict(&x)?;
        Ok(self.scaler.unscale(0, &pred))
    }

    pub fn forecast(&self, history: &[f64], steps: usize) -> Result<Vec<f64>> {
        forecast(&self.model, &self.scaler, history, steps)
    }
}

/// Recursive multi-step forecast from the last `n_lags` raw values. Each
/// step's prediction, clamped at zero, is shifted into the window for the
/// next one.
pub fn forecast(model: &Model, scaler: &Standardizer, history: &[f64], steps: usize) -> Result<Vec<f64>> {
    if history.len() != model.n_features {
        return Err(PredictorError::Dimension {
            expected: model.n_features,
            found: history.len(),
        });
    }
    if steps == 0 {
        return Err(PredictorError::ZeroSteps);
    }
    let mut window = history.to_vec();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = DMatrix::from_row_slice(1, window.len(), &scaler.scale(0, &window));
        let scaled = model.predict(&x)?[0];
        let value = scaler.unscale(0, &[scaled])[0].max(0.0);
        out.push(value);
        window.remove(0);
        window.push(value);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: String,
    /// Test RMSE per path, in path order.
    pub rmse: Vec<f64>,
    /// Whether this row beats the persistence baseline on each path.
    pub beats_persistence: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub paths: Vec<String>,
    pub n_lags: usize,
    pub seed: u64,
    pub train_len: Vec<usize>,
    pub test_len: Vec<usize>,
    /// Rows the scaler saw per path; equals `train_len` by construction.
    pub scaler_fit_rows: Vec<usize>,
    pub models: Vec<ModelRow>,
    pub persistence: Vec<f64>,
    pub chosen_model: ModelKind,
}

impl EvalReport {
    pub fn rmse_by_model(&self) -> BTreeMap<String, Vec<f64>> {
        self.models
            .iter()
            .map(|r| (r.model.clone(), r.rmse.clone()))
            .collect()
    }

    pub fn model(&self, kind: ModelKind) -> Option<&ModelRow> {
        self.models.iter().find(|r| r.model == kind.name())
    }

    /// `model,path,rmse`, one line per (model, path), baseline last.
    pub fn write_report_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "path", "rmse"])?;
        let baseline = (PERSISTENCE, &self.persistence);
        let rows = self.models.iter().map(|r| (r.model.as_str(), &r.rmse));
        for (name, rmses) in rows.chain(std::iter::once(baseline)) {
            for (path, v) in self.paths.iter().zip(rmses.iter()) {
                out.write_record([name, path.as_str(), &format_number(*v)])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// `model,x,y` with x the first path's RMSE and y the second's.
    pub fn write_scatter_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["model", "x", "y"])?;
        let baseline = (PERSISTENCE, &self.persistence);
        let rows = self.models.iter().map(|r| (r.model.as_str(), &r.rmse));
        for (name, rmses) in rows.chain(std::iter::once(baseline)) {
            let coord = |i: usize| rmses.get(i).map(|v| format_number(*v)).unwrap_or_default();
            out.write_record([name.to_string(), coord(0), coord(1)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Trains every kind on the first 75% of each path and scores one-step
/// predictions on the rest. Test windows reach back into the training tail
/// so every test sample is a target.
pub fn evaluate(
    paths: &[(&str, &[f64])],
    kinds: &[ModelKind],
    hp: &Hyperparams,
    n_lags: usize,
    seed: u64,
) -> Result<EvalReport> {
    if paths.is_empty() || kinds.is_empty() {
        return Err(PredictorError::Empty);
    }
    let mut splits = Vec::new();
    for (_, series) in paths {
        if series.iter().any(|v| !v.is_finite()) {
            return Err(PredictorError::NonFinite);
        }
        let (train, test) = split_train_test(series)?;
        if train.len() <= n_lags {
            return Err(PredictorError::TooShort {
                len: series.len(),
                min: (4 * (n_lags + 1)).div_ceil(3),
            });
        }
        splits.push((*series, train.len(), test));
    }

    fn windows(series: &[f64], k: usize, n_lags: usize) -> Vec<&[f64]> {
        (k..series.len()).map(|i| &series[i - n_lags..i]).collect()
    }

    let persistence: Vec<f64> = splits
        .iter()
        .map(|(series, k, test)| {
            let last: Vec<f64> = windows(series, *k, n_lags).iter().map(|w| w[n_lags - 1]).collect();
            rmse(&last, test)
        })
        .collect::<Result<_>>()?;

    // (path, kind) jobs are independent and deterministic, so run them on
    // scoped threads
    let results: Vec<Vec<Result<(f64, usize)>>> = std::thread::scope(|s| {
        let handles: Vec<Vec<_>> = splits
            .iter()
            .map(|(series, k, test)| {
                kinds
                    .iter()
                    .map(|&kind| {
                        s.spawn(move || {
                            let f = Forecaster::train(kind, &series[..*k], n_lags, hp, seed)?;
                            let pred = f.predict_windows(&windows(series, *k, n_lags))?;
                            Ok((rmse(&pred, test)?, f.scaler.fitted_rows()))
                        })
                    })
                    .collect()
            })
            .collect();
        handles
            .into_iter()
            .map(|hs| hs.into_iter().map(|h| h.join().expect("training thread panicked")).collect())
            .collect()
    });

    let mut models: Vec<ModelRow> = kinds
        .iter()
        .map(|k| ModelRow {
            model: k.name().to_string(),
            rmse: Vec::new(),
            beats_persistence: Vec::new(),
        })
        .collect();
    let mut scaler_fit_rows = Vec::new();
    for (p, per_kind) in results.into_iter().enumerate() {
        for (row, res) in models.iter_mut().zip(per_kind) {
            let (e, rows) = res?;
            row.rmse.push(e);
            row.beats_persistence.push(e < persistence[p]);
            if scaler_fit_rows.len() == p {
                scaler_fit_rows.push(rows);
            }
        }
    }

    let report_map = models
        .iter()
        .map(|r| (r.model.clone(), r.rmse.clone()))
        .collect();
    let chosen_model = select_best(&report_map)?.parse()?;
    Ok(EvalReport {
        schema_version: crate::SCHEMA_VERSION,
        paths: paths.iter().map(|(n, _)| n.to_string()).collect(),
        n_lags,
        seed,
        train_len: splits.iter().map(|s| s.1).collect(),
        test_len: splits.iter().map(|s| s.2.len()).collect(),
        scaler_fit_rows,
        models,
        persistence,
        chosen_model,
    })
}
