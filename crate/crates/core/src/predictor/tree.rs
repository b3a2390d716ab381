//! CART regression tree with squared-error splits.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [f64],
    params: &'a TreeParams,
    max_features: usize,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl RegressionTree {
    /// Grows a tree on the rows listed in `rows` (duplicates allowed, as in
    /// a bootstrap sample). With `rng` set, each split considers a random
    /// subset of `max_features` features; otherwise all features.
    pub fn fit(
        x: &DMatrix<f64>,
        y: &[f64],
        rows: Vec<usize>,
        params: &TreeParams,
        max_features: usize,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            params,
            max_features: max_features.clamp(1, x.ncols().max(1)),
            rng,
            nodes: Vec::new(),
        };
        b.grow(rows, 0);
        RegressionTree {
            nodes: b.nodes,
            n_features: x.ncols(),
        }
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|r| self.predict_row(|f| x[(r, f)]))
            .collect()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| self.y[r]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(TreeNode::Leaf { value: mean });

        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if pure || !depth_ok || rows.len() < self.params.min_samples_split.max(2) {
            return id;
        }
        let Some(best) = self.best_split(&rows) else {
            return id;
        };
        let left = self.grow(best.left, depth + 1);
        let right = self.grow(best.right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match self.rng.as_deref_mut() {
            Some(rng) if self.max_features < p => {
                let mut f = sample(rng, p, self.max_features).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for feature in self.candidate_features() {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| self.x[(a, feature)].total_cmp(&self.x[(b, feature)]));
            let total: f64 = order.iter().map(|&r| self.y[r]).sum();
            let total_sq: f64 = order.iter().map(|&r| self.y[r] * self.y[r]).sum();
            let (mut sum, mut sq) = (0.0, 0.0);
            for i in 0..n - 1 {
                let yi = self.y[order[i]];
                sum += yi;
                sq += yi * yi;
                let nl = i + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let here = self.x[(order[i], feature)];
                let next = self.x[(order[i + 1], feature)];
                if here == next {
                    continue;
                }
                let sse_l = sq - sum * sum / nl as f64;
                let rs = total - sum;
                let sse_r = (total_sq - sq) - rs * rs / nr as f64;
                let sse = sse_l + sse_r;
                if best.as_ref().is_none_or(|b| sse < b.3) {
                    let mut threshold = here + (next - here) / 2.0;
                    if threshold >= next {
                        // adjacent floats: the midpoint rounded up
                        threshold = here;
                    }
                    best = Some((feature, nl, threshold, sse));
                }
            }
        }
        let (feature, nl, threshold, _) = best.filter(|b| b.3.is_finite())?;
        let mut order = rows.to_vec();
        order.sort_by(|&a, &b| self.x[(a, feature)].total_cmp(&self.x[(b, feature)]));
        let right = order.split_off(nl);
        Some(BestSplit {
            feature,
            threshold,
            left: order,
            right,
        })
    }
}
