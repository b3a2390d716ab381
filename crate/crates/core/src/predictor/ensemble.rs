use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{RegressionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    /// ⌈p / 3⌉, the usual regression-forest default.
    ThirdCeil,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::All => p,
            MaxFeatures::ThirdCeil => p.div_ceil(3),
            MaxFeatures::Count(k) => k.min(p),
        }
        .max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub tree: TreeParams,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::ThirdCeil,
            tree: TreeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        BoostParams {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Each tree gets its own generator seeded from a master stream, so the
    /// forest depends only on `seed` and the data.
    pub fn fit(x: &DMatrix<f64>, y: &[f64], params: &ForestParams, seed: u64) -> Self {
        let n = y.len();
        let m = params.max_features.resolve(x.ncols());
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let trees = (0..params.n_trees)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, y, rows, &params.tree, m, Some(&mut rng))
            })
            .collect();
        RandomForest { trees }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![0.0; x.nrows()];
        for tree in &self.trees {
            for (o, p) in out.iter_mut().zip(tree.predict(x)) {
                *o += p;
            }
        }
        let k = self.trees.len().max(1) as f64;
        out.iter_mut().for_each(|o| *o /= k);
        out
    }
}

/// Least-squares gradient boosting: each stage fits a shallow tree to the
/// current residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub init: f64,
    pub learning_rate: f64,
    pub stages: Vec<RegressionTree>,
}

impl GradientBoosting {
    pub fn fit(x: &DMatrix<f64>, y: &[f64], params: &BoostParams) -> Self {
        let n = y.len();
        let init = y.iter().sum::<f64>() / n as f64;
        let mut current = vec![init; n];
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            ..TreeParams::default()
        };
        let mut stages = Vec::with_capacity(params.n_stages);
        for _ in 0..params.n_stages {
            let residual: Vec<f64> = y.iter().zip(&current).map(|(a, b)| a - b).collect();
            let tree = RegressionTree::fit(x, &residual, (0..n).collect(), &tree_params, x.ncols(), None);
            for (c, p) in current.iter_mut().zip(tree.predict(x)) {
                *c += params.learning_rate * p;
            }
            stages.push(tree);
        }
        GradientBoosting {
            init,
            learning_rate: params.learning_rate,
            stages,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let mut out = vec![self.init; x.nrows()];
        for tree in &self.stages {
            for (o, p) in out.iter_mut().zip(tree.predict(x)) {
                *o += self.learning_rate * p;
            }
        }
        out
    }
}
