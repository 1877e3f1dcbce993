//! Depth-limited binary decision trees grown greedily on GINI impurity.

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainingSet};
use crate::error::Result;

/// Improvements smaller than this count as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        n_pos: usize,
        n_neg: usize,
    },
}

impl TreeNode {
    /// Follows `x[feature] <= threshold` to the left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
                TreeNode::Leaf { n_pos, n_neg } => return leaf_probability(*n_pos, *n_neg),
            }
        }
    }

    /// Edges on the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<(usize, usize)>) {
        match self {
            TreeNode::Internal { left, right, .. } => {
                left.collect_leaves(out);
                right.collect_leaves(out);
            }
            TreeNode::Leaf { n_pos, n_neg } => out.push((*n_pos, *n_neg)),
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Internal {
                feature, left, right, ..
            } => Some(
                [Some(*feature), left.max_feature(), right.max_feature()]
                    .into_iter()
                    .flatten()
                    .max()
                    .expect("non-empty"),
            ),
            TreeNode::Leaf { .. } => None,
        }
    }
}

pub fn leaf_probability(n_pos: usize, n_neg: usize) -> f64 {
    n_pos as f64 / (n_pos + n_neg) as f64
}

/// `1 - p² - (1-p)²` for a node with the given class counts; 0 for an empty node.
pub fn gini(n_pos: usize, n_neg: usize) -> f64 {
    let n = (n_pos + n_neg) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p = n_pos as f64 / n;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub dim: usize,
    pub root: TreeNode,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.root.predict(x)
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split(data: &TrainingSet, idx: &[usize], min_leaf: usize) -> Option<Split> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| data.ys[i] > 0.5).count();
    let mut best: Option<Split> = None;
    let mut order = idx.to_vec();
    for f in 0..data.dim {
        order.sort_by(|&a, &b| data.xs[a][f].total_cmp(&data.xs[b][f]).then(a.cmp(&b)));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            if data.ys[order[k]] > 0.5 {
                left_pos += 1;
            }
            let (lo, hi) = (data.xs[order[k]][f], data.xs[order[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let mut threshold = lo + (hi - lo) / 2.0;
            if threshold >= hi {
                threshold = lo;
            }
            let left_neg = n_left - left_pos;
            let right_pos = total_pos - left_pos;
            let right_neg = (n - n_left) - right_pos;
            let impurity = (n_left as f64 * gini(left_pos, left_neg)
                + (n - n_left) as f64 * gini(right_pos, right_neg))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity - TIE_EPS) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(data: &TrainingSet, idx: &[usize], depth: usize, config: &TrainConfig) -> TreeNode {
    let n_pos = idx.iter().filter(|&&i| data.ys[i] > 0.5).count();
    let n_neg = idx.len() - n_pos;
    let leaf = TreeNode::Leaf { n_pos, n_neg };
    if depth >= config.tree_max_depth || n_pos == 0 || n_neg == 0 || idx.len() < 2 * config.min_leaf {
        return leaf;
    }
    let Some(split) = best_split(data, idx, config.min_leaf) else {
        return leaf;
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| data.xs[i][split.feature] <= split.threshold);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(data, &left, depth + 1, config)),
        right: Box::new(grow(data, &right, depth + 1, config)),
    }
}

/// Greedy recursive splitting on weighted child GINI impurity.
///
/// Candidate thresholds are midpoints between consecutive distinct values of a feature.
/// Ties go to the lowest `(feature, threshold)`. A node becomes a leaf at `tree_max_depth`,
/// when pure, or when it holds fewer than `2 * min_leaf` examples.
pub fn train_tree(positives: &[Vec<f64>], negatives: &[Vec<f64>], config: &TrainConfig) -> Result<DecisionTree> {
    let data = TrainingSet::from_classes(positives, negatives)?;
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(DecisionTree {
        dim: data.dim,
        root: grow(&data, &idx, 0, config),
    })
}
