//! CART regression trees, bagged random forests and squared-loss gradient
//! boosting.
//!
//! Splits maximize the reduction in squared error. Thresholds are midpoints of
//! adjacent distinct sorted values; a row goes left when `x <= threshold`.
//! Equal-gain candidates resolve to the lowest feature index, then the lowest
//! threshold.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        /// Squared-error reduction achieved by this split.
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        samples: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
    pub n_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

fn check_dims(rows: &[Vec<f64>], targets: &[f64]) -> Result<usize> {
    if rows.is_empty() {
        return Err(Error::Empty("training set has no rows".into()));
    }
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch { expected: rows.len(), actual: targets.len() });
    }
    let p = rows[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, actual: bad.len() });
    }
    Ok(p)
}

struct Grower<'a, F> {
    rows: &'a [Vec<f64>],
    targets: &'a [f64],
    max_depth: Option<usize>,
    min_leaf: usize,
    candidates: F,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<F: FnMut() -> Vec<usize>> Grower<'_, F> {
    fn leaf(&mut self, indices: &[usize]) -> usize {
        let value = indices.iter().map(|&i| self.targets[i]).sum::<f64>() / indices.len() as f64;
        self.nodes.push(Node::Leaf { value, samples: indices.len() });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, indices: &[usize], sse: f64) -> Option<BestSplit> {
        let n = indices.len();
        let total: f64 = indices.iter().map(|&i| self.targets[i]).sum();
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        for feature in (self.candidates)() {
            self.scratch.clear();
            self.scratch
                .extend(indices.iter().map(|&i| (self.rows[i][feature], self.targets[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.scratch[k].1;
                let n_left = k + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf {
                    continue;
                }
                if n_right < self.min_leaf {
                    break;
                }
                let (lo, hi) = (self.scratch[k].0, self.scratch[k + 1].0);
                if lo >= hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - base;
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit { feature, threshold, gain });
                }
            }
        }
        best.filter(|b| b.gain > 1e-12 * sse)
    }

    fn grow(&mut self, indices: &mut [usize], depth: usize) -> usize {
        let n = indices.len();
        let mean = indices.iter().map(|&i| self.targets[i]).sum::<f64>() / n as f64;
        let sse: f64 = indices.iter().map(|&i| (self.targets[i] - mean).powi(2)).sum();
        let depth_ok = self.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || n < 2 * self.min_leaf || sse <= 0.0 {
            return self.leaf(indices);
        }
        let Some(split) = self.best_split(indices, sse) else {
            return self.leaf(indices);
        };

        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean, samples: n });
        let rows = self.rows;
        let mut cut = 0;
        for k in 0..n {
            if rows[indices[k]][split.feature] <= split.threshold {
                indices.swap(k, cut);
                cut += 1;
            }
        }
        let (left_idx, right_idx) = indices.split_at_mut(cut);
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            left,
            right,
        };
        slot
    }
}

fn grow_tree<F: FnMut() -> Vec<usize>>(
    rows: &[Vec<f64>],
    targets: &[f64],
    mut indices: Vec<usize>,
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    candidates: F,
) -> RegressionTree {
    let n_features = rows[0].len();
    let mut grower = Grower {
        rows,
        targets,
        max_depth,
        min_leaf: min_samples_leaf.max(1),
        candidates,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(indices.len()),
    };
    grower.grow(&mut indices, 0);
    RegressionTree {
        nodes: grower.nodes,
        n_features,
        max_depth,
        min_samples_leaf: min_samples_leaf.max(1),
    }
}

/// Greedy CART fit. `max_depth = None` grows until leaves are pure or too small.
pub fn fit_tree(
    rows: &[Vec<f64>],
    targets: &[f64],
    max_depth: Option<usize>,
    min_samples_leaf: usize,
) -> Result<RegressionTree> {
    let p = check_dims(rows, targets)?;
    let all: Vec<usize> = (0..p).collect();
    Ok(grow_tree(rows, targets, (0..rows.len()).collect(), max_depth, min_samples_leaf, || all.clone()))
}

impl RegressionTree {
    pub(crate) fn predict_row(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value, .. } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: row.len() });
        }
        Ok(self.predict_row(row))
    }

    /// Index of the leaf a row lands in.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut idx = 0;
        while let Node::Split { feature, threshold, left, right, .. } = &self.nodes[idx] {
            idx = if row[*feature] <= *threshold { *left } else { *right };
        }
        idx
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Total split gain per feature (unnormalized).
    pub fn split_gains(&self) -> Vec<f64> {
        let mut gains = vec![0.0; self.n_features];
        for node in &self.nodes {
            if let Node::Split { feature, gain, .. } = node {
                gains[*feature] += gain;
            }
        }
        gains
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` means `⌈p/3⌉`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 2,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<RegressionTree>,
    /// Seed of each member tree (`seed + index`).
    pub seeds: Vec<u64>,
    pub max_features: usize,
    pub bootstrap: bool,
}

/// Bagged trees. Tree `i` draws its bootstrap sample and per-split feature
/// subsets from a generator seeded with `seed + i`, so parallel and
/// sequential fits agree bit for bit.
pub fn fit_random_forest(rows: &[Vec<f64>], targets: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let p = check_dims(rows, targets)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("random forest needs at least one tree".into()));
    }
    let m = params.max_features.unwrap_or(p.div_ceil(3)).max(1).min(p.max(1));
    if params.max_features.is_some_and(|mf| mf > p) {
        return Err(Error::InvalidParameter(format!("max_features {} exceeds feature count {p}", params.max_features.unwrap())));
    }
    let n = rows.len();
    let seeds: Vec<u64> = (0..params.n_trees as u64).map(|i| seed.wrapping_add(i)).collect();
    let trees = seeds
        .par_iter()
        .map(|&tree_seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(rows, targets, indices, params.max_depth, params.min_samples_leaf, move || {
                if m >= p {
                    (0..p).collect()
                } else {
                    let mut picked = sample(&mut rng, p, m).into_vec();
                    picked.sort_unstable();
                    picked
                }
            })
        })
        .collect();
    Ok(ForestModel {
        trees,
        seeds,
        max_features: m,
        bootstrap: params.bootstrap,
    })
}

impl ForestModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let first = &self.trees[0];
        if row.len() != first.n_features {
            return Err(Error::DimensionMismatch { expected: first.n_features, actual: row.len() });
        }
        Ok(self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64)
    }

    /// Mean of per-tree normalized split-gain importances, renormalized to sum
    /// to 1. A forest without any split reports uniform importance.
    pub fn feature_importances(&self) -> Vec<f64> {
        let p = self.trees[0].n_features;
        let mut acc = vec![0.0; p];
        for tree in &self.trees {
            let gains = tree.split_gains();
            let total: f64 = gains.iter().sum();
            if total > 0.0 {
                for (a, g) in acc.iter_mut().zip(gains) {
                    *a += g / total;
                }
            }
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            acc.iter().map(|a| a / total).collect()
        } else {
            vec![1.0 / p as f64; p]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostingParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedStage {
    pub tree: RegressionTree,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    /// Training target mean.
    pub init: f64,
    pub stages: Vec<BoostedStage>,
    pub n_features: usize,
    /// Recorded for provenance; fitting uses every row and feature, so it is
    /// deterministic regardless of seed.
    pub seed: u64,
}

/// Squared-loss boosting: every stage fits a depth-limited tree to the
/// current residuals and adds it scaled by the learning rate.
pub fn fit_gradient_boosting(
    rows: &[Vec<f64>],
    targets: &[f64],
    params: &BoostingParams,
    seed: u64,
) -> Result<BoostedModel> {
    let p = check_dims(rows, targets)?;
    if !(params.learning_rate > 0.0 && params.learning_rate <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must lie in (0, 1], got {}",
            params.learning_rate
        )));
    }
    let init = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut current = vec![init; targets.len()];
    let mut stages = Vec::with_capacity(params.n_stages);
    for _ in 0..params.n_stages {
        let residuals: Vec<f64> = targets.iter().zip(&current).map(|(y, f)| y - f).collect();
        let tree = fit_tree(rows, &residuals, Some(params.max_depth), params.min_samples_leaf)?;
        for (f, row) in current.iter_mut().zip(rows) {
            *f += params.learning_rate * tree.predict_row(row);
        }
        stages.push(BoostedStage { tree, learning_rate: params.learning_rate });
    }
    Ok(BoostedModel { init, stages, n_features: p, seed })
}

impl BoostedModel {
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch { expected: self.n_features, actual: row.len() });
        }
        Ok(self.init + self.stages.iter().map(|s| s.learning_rate * s.tree.predict_row(row)).sum::<f64>())
    }

    /// Training MSE after 0, 1, …, n_stages stages.
    pub fn staged_mse(&self, rows: &[Vec<f64>], targets: &[f64]) -> Vec<f64> {
        let n = targets.len() as f64;
        let mut current = vec![self.init; targets.len()];
        let mse = |cur: &[f64]| cur.iter().zip(targets).map(|(f, y)| (f - y).powi(2)).sum::<f64>() / n;
        let mut out = vec![mse(&current)];
        for stage in &self.stages {
            for (f, row) in current.iter_mut().zip(rows) {
                *f += stage.learning_rate * stage.tree.predict_row(row);
            }
            out.push(mse(&current));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let x = i as f64;
                vec![(x * 0.37).sin(), (x * 0.11).cos(), (i % 7) as f64]
            })
            .collect();
        let y = rows.iter().map(|r| if r[0] > 0.2 { 3.0 } else { -1.0 } + r[1] * r[2]).collect();
        (rows, y)
    }

    #[test]
    fn constant_target_single_leaf() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let tree = fit_tree(&rows, &[4.0; 3], None, 1).unwrap();
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 4.0, samples: 3 }]);
    }

    #[test]
    fn stump_splits_at_midpoint() {
        let tree = fit_tree(&[vec![0.0], vec![1.0]], &[0.0, 10.0], Some(1), 1).unwrap();
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict(&[0.0]).unwrap(), 0.0);
        assert_eq!(tree.predict(&[1.0]).unwrap(), 10.0);
    }

    #[test]
    fn depth_zero_is_mean() {
        let tree = fit_tree(&[vec![0.0], vec![1.0], vec![5.0]], &[1.0, 2.0, 6.0], Some(0), 1).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[100.0]).unwrap(), 3.0);
    }

    #[test]
    fn equal_gain_prefers_lowest_feature() {
        // both features separate the targets identically
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let tree = fit_tree(&rows, &[0.0, 1.0], Some(1), 1).unwrap();
        assert!(matches!(tree.nodes[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn leaves_respect_min_samples() {
        let (rows, y) = toy(200);
        let tree = fit_tree(&rows, &y, None, 5).unwrap();
        for node in &tree.nodes {
            if let Node::Leaf { samples, .. } = node {
                assert!(*samples >= 5);
            }
        }
    }

    #[test]
    fn empty_is_error() {
        assert!(fit_tree(&[], &[], None, 1).is_err());
    }

    #[test]
    fn forest_without_bagging_equals_tree() {
        let (rows, y) = toy(120);
        let params = ForestParams {
            n_trees: 1,
            max_depth: None,
            min_samples_leaf: 2,
            max_features: Some(3),
            bootstrap: false,
        };
        let forest = fit_random_forest(&rows, &y, &params, 11).unwrap();
        let tree = fit_tree(&rows, &y, None, 2).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn forest_is_seed_deterministic() {
        let (rows, y) = toy(150);
        let params = ForestParams { n_trees: 10, ..Default::default() };
        let a = fit_random_forest(&rows, &y, &params, 5).unwrap();
        let b = fit_random_forest(&rows, &y, &params, 5).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&rows, &y, &params, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forest_rejects_bad_params() {
        let (rows, y) = toy(10);
        let too_many = ForestParams { max_features: Some(4), ..Default::default() };
        assert!(fit_random_forest(&rows, &y, &too_many, 0).is_err());
        let none = ForestParams { n_trees: 0, ..Default::default() };
        assert!(fit_random_forest(&rows, &y, &none, 0).is_err());
    }

    #[test]
    fn forest_prediction_is_member_mean() {
        let (rows, y) = toy(100);
        let forest = fit_random_forest(&rows, &y, &ForestParams { n_trees: 7, ..Default::default() }, 3).unwrap();
        for row in rows.iter().take(10) {
            let mean = forest.trees.iter().map(|t| t.predict(row).unwrap()).sum::<f64>() / 7.0;
            assert!((forest.predict(row).unwrap() - mean).abs() < 1e-12);
        }
        let imp = forest.feature_importances();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boosting_zero_stages_predicts_mean() {
        let params = BoostingParams { n_stages: 0, ..Default::default() };
        let m = fit_gradient_boosting(&[vec![0.0], vec![1.0]], &[2.0, 4.0], &params, 0).unwrap();
        assert_eq!(m.predict(&[7.0]).unwrap(), 3.0);
    }

    #[test]
    fn boosting_single_full_stump() {
        let params = BoostingParams { n_stages: 1, learning_rate: 1.0, max_depth: 1, min_samples_leaf: 1 };
        let m = fit_gradient_boosting(&[vec![0.0], vec![1.0]], &[0.0, 10.0], &params, 0).unwrap();
        assert_eq!(m.init, 5.0);
        assert_eq!(m.predict(&[0.0]).unwrap(), 0.0);
        assert_eq!(m.predict(&[1.0]).unwrap(), 10.0);
    }

    #[test]
    fn boosting_loss_monotone_and_sum_by_hand() {
        let (rows, y) = toy(150);
        let m = fit_gradient_boosting(&rows, &y, &BoostingParams { n_stages: 30, ..Default::default() }, 0).unwrap();
        let staged = m.staged_mse(&rows, &y);
        assert!(staged.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let row = &rows[17];
        let mut by_hand = m.init;
        for s in &m.stages {
            by_hand += s.learning_rate * s.tree.predict(row).unwrap();
        }
        assert!((m.predict(row).unwrap() - by_hand).abs() < 1e-12);
    }

    #[test]
    fn boosting_rejects_bad_rate() {
        let params = BoostingParams { learning_rate: 1.5, ..Default::default() };
        assert!(fit_gradient_boosting(&[vec![0.0]], &[1.0], &params, 0).is_err());
    }
}
