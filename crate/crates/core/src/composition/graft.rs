//! Composing decision trees by grafting one tree onto the positive leaves of another.

use super::{check_dim, ObjectScores};
use crate::classifiers::tree::{leaf_probability, TreeNode};
use crate::classifiers::Backend;
use crate::data::Scene;
use crate::error::{Error, Result};
use crate::wac::WacModel;

/// Leaf indices (left-to-right order) where the next tree gets attached: the two most
/// probable leaves with probability at least 0.5, or the single most probable leaf when no
/// leaf reaches 0.5. Ties go to the leftmost leaf.
pub fn graft_points(tree: &TreeNode) -> Vec<usize> {
    let probs: Vec<f64> = tree.leaves().into_iter().map(|(p, n)| leaf_probability(p, n)).collect();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    // stable sort keeps leaf order among equal probabilities
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let positive: Vec<usize> = order.iter().copied().filter(|&i| probs[i] >= 0.5).take(2).collect();
    if positive.is_empty() {
        order.truncate(1);
        order
    } else {
        positive
    }
}

fn replace_leaves(node: &TreeNode, targets: &[usize], scion: &TreeNode, next_leaf: &mut usize) -> TreeNode {
    match node {
        TreeNode::Internal {
            feature,
            threshold,
            left,
            right,
        } => {
            let left = replace_leaves(left, targets, scion, next_leaf);
            let right = replace_leaves(right, targets, scion, next_leaf);
            TreeNode::Internal {
                feature: *feature,
                threshold: *threshold,
                left: Box::new(left),
                right: Box::new(right),
            }
        }
        leaf @ TreeNode::Leaf { .. } => {
            let idx = *next_leaf;
            *next_leaf += 1;
            if targets.contains(&idx) {
                scion.clone()
            } else {
                leaf.clone()
            }
        }
    }
}

/// Grafts the trees in order: the second tree replaces the graft points of the first, the
/// third replaces the graft points of every copy of the second, and so on. Graft points are
/// chosen on each word's own tree.
pub fn graft_trees(trees: &[&TreeNode]) -> Result<TreeNode> {
    let (last, rest) = trees
        .split_last()
        .ok_or_else(|| Error::InvalidInput("cannot graft zero trees".into()))?;
    let mut composite = (*last).clone();
    for stock in rest.iter().rev() {
        let points = graft_points(stock);
        composite = replace_leaves(stock, &points, &composite, &mut 0);
    }
    Ok(composite)
}

/// The composite tree for the in-vocabulary words, in expression order.
pub fn grafted_tree<S: AsRef<str>>(model: &WacModel, words: &[S]) -> Result<Option<TreeNode>> {
    model.require_backend(Backend::Tree, "tree grafting")?;
    let trees: Vec<&TreeNode> = words
        .iter()
        .filter_map(|w| model.classifier(w.as_ref()))
        .map(|c| &c.as_tree().expect("backend checked").root)
        .collect();
    if trees.is_empty() {
        return Ok(None);
    }
    graft_trees(&trees).map(Some)
}

pub(crate) fn compose_tree_graft<S: AsRef<str>>(model: &WacModel, words: &[S], scene: &Scene) -> Result<ObjectScores> {
    let Some(tree) = grafted_tree(model, words)? else {
        return Ok(ObjectScores::uniform(scene));
    };
    let mut scores = ObjectScores::zeros(scene);
    for (s, e) in scores.scores.iter_mut().zip(&scene.entities) {
        check_dim(model, e.features.len())?;
        *s = tree.predict(&e.features);
    }
    Ok(scores)
}
