//! Bandwidth regression: scaling, six regressors written from scratch,
//! RMSE scoring, model selection and recursive forecasting.

mod ensemble;
mod linear;
mod pipeline;
mod scaler;
mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{BoostParams, ForestParams, GradientBoosting, MaxFeatures, RandomForest};
pub use linear::{fit_lasso, fit_ridge, LinearModel};
pub use pipeline::{
    evaluate, forecast, split_train_test, EvalReport, Forecaster, ModelRow, PERSISTENCE,
};
pub use scaler::Standardizer;
pub use tree::{RegressionTree, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum PredictorError {
    #[error("no data")]
    Empty,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("expected {expected} columns, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series of length {len} is too short (need {min})")]
    TooShort { len: usize, min: usize },
    #[error("bad hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("steps must be at least 1")]
    ZeroSteps,
}

pub type Result<T, E = PredictorError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "LR")]
    Ols,
    Ridge,
    Lasso,
    #[serde(rename = "DTR")]
    DecisionTree,
    #[serde(rename = "RFR")]
    RandomForest,
    #[serde(rename = "GBR")]
    GradientBoosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Ols,
        ModelKind::Ridge,
        ModelKind::Lasso,
        ModelKind::DecisionTree,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
    ];

    /// Short name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ols => "LR",
            ModelKind::Ridge => "Ridge",
            ModelKind::Lasso => "Lasso",
            ModelKind::DecisionTree => "DTR",
            ModelKind::RandomForest => "RFR",
            ModelKind::GradientBoosting => "GBR",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = PredictorError;

    fn from_str(s: &str) -> Result<Self> {
        let k = match s.to_ascii_lowercase().replace(['_', '-'], "").as_str() {
            "lr" | "ols" | "linear" | "linearregression" => ModelKind::Ols,
            "ridge" => ModelKind::Ridge,
            "lasso" => ModelKind::Lasso,
            "dtr" | "tree" | "decisiontree" => ModelKind::DecisionTree,
            "rfr" | "forest" | "randomforest" => ModelKind::RandomForest,
            "gbr" | "boosting" | "gradientboosting" => ModelKind::GradientBoosting,
            _ => return Err(PredictorError::UnknownModel(s.to_string())),
        };
        Ok(k)
    }
}

/// Hyperparameters for every model kind. The defaults follow the usual
/// library defaults for these regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub ridge_lambda: f64,
    pub lasso_alpha: f64,
    pub lasso_max_iter: usize,
    pub lasso_tol: f64,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub boost: BoostParams,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            ridge_lambda: 1.0,
            lasso_alpha: 0.1,
            lasso_max_iter: 1000,
            lasso_tol: 1e-6,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Linear(LinearModel),
    Tree(RegressionTree),
    Forest(RandomForest),
    Boosted(GradientBoosting),
}

/// A fitted regressor. There is no unfitted state: `fit` is the only way
/// to obtain one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: ModelKind,
    pub n_features: usize,
    pub params: ModelParams,
}

pub fn fit(
    kind: ModelKind,
    x: &DMatrix<f64>,
    y: &[f64],
    hp: &Hyperparams,
    seed: u64,
) -> Result<Model> {
    if x.nrows() == 0 || y.is_empty() {
        return Err(PredictorError::Empty);
    }
    if x.nrows() != y.len() {
        return Err(PredictorError::LengthMismatch(x.nrows(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(PredictorError::NonFinite);
    }
    let params = match kind {
        ModelKind::Ols => ModelParams::Linear(fit_ridge(x, y, 0.0)?),
        ModelKind::Ridge => ModelParams::Linear(fit_ridge(x, y, hp.ridge_lambda)?),
        ModelKind::Lasso => ModelParams::Linear(fit_lasso(
            x,
            y,
            hp.lasso_alpha,
            hp.lasso_max_iter,
            hp.lasso_tol,
        )?),
        ModelKind::DecisionTree => ModelParams::Tree(RegressionTree::fit(
            x,
            y,
            (0..y.len()).collect(),
            &hp.tree,
            x.ncols(),
            None,
        )),
        ModelKind::RandomForest => {
            if hp.forest.n_trees == 0 {
                return Err(PredictorError::Hyperparameter("forest needs at least one tree".into()));
            }
            ModelParams::Forest(RandomForest::fit(x, y, &hp.forest, seed))
        }
        ModelKind::GradientBoosting => {
            if hp.boost.learning_rate.is_nan() || hp.boost.learning_rate <= 0.0 {
                return Err(PredictorError::Hyperparameter(format!(
                    "learning rate {}",
                    hp.boost.learning_rate
                )));
            }
            ModelParams::Boosted(GradientBoosting::fit(x, y, &hp.boost))
        }
    };
    Ok(Model {
        kind,
        n_features: x.ncols(),
        params,
    })
}

impl Model {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_features {
            return Err(PredictorError::Dimension {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(PredictorError::NonFinite);
        }
        Ok(match &self.params {
            ModelParams::Linear(m) => x
                .row_iter()
                .map(|r| m.predict_row(r.iter().copied()))
                .collect(),
            ModelParams::Tree(t) => t.predict(x),
            ModelParams::Forest(f) => f.predict(x),
            ModelParams::Boosted(g) => g.predict(x),
        })
    }
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64> {
    if pred.len() != obs.len() {
        return Err(PredictorError::LengthMismatch(pred.len(), obs.len()));
    }
    if pred.is_empty() {
        return Err(PredictorError::Empty);
    }
    let mse = pred
        .iter()
        .zip(obs)
        .map(|(p, o)| (p - o).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Picks the candidate whose per-path RMSE vector has the smallest
/// Euclidean norm; equal norms go to the lexicographically smaller name.
pub fn select_best(reports: &BTreeMap<String, Vec<f64>>) -> Result<String> {
    let mut best: Option<(&String, f64)> = None;
    for (name, rmses) in reports {
        let norm = rmses.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() {
            return Err(PredictorError::NonFinite);
        }
        // BTreeMap iterates in name order, so strict < keeps the first on ties
        if best.is_none_or(|(_, b)| norm < b) {
            best = Some((name, norm));
        }
    }
    best.map(|(n, _)| n.clone()).ok_or(PredictorError::Empty)
}
