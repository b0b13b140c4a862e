//! Tree-based forecasters: CART regression trees, bootstrap-aggregated
//! forests, least-squares gradient boosting, per-feature prediction-stability
//! intervals and the 21-model pool.
//!
//! Conventions, fixed for reproducibility:
//! - a sample routes left iff `x[feature] <= threshold`;
//! - split thresholds are midpoints between consecutive distinct sorted
//!   feature values;
//! - equal-gain ties go to the lowest feature index, then lowest threshold;
//! - `min_samples_split = 2`, `min_samples_leaf = 1`; depth is the only
//!   regularizer.

use crate::error::{Result, TsmsError};
use crate::series::LagWindow;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_LEARNING_RATE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A CART regression tree stored as an arena with the root at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    pub max_depth: usize,
}

impl RegressionTree {
    /// Assemble a tree from an explicit node arena (root at index 0).
    pub fn from_parts(nodes: Vec<Node>, max_depth: usize) -> Self {
        Self { nodes, max_depth }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Single,
    Forest,
    Gbt,
}

/// A trained forecaster: one or more trees with weights and an additive
/// offset (the boosting initialization; zero otherwise).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub kind: EnsembleKind,
    pub trees: Vec<RegressionTree>,
    pub tree_weights: Vec<f64>,
    pub base_offset: f64,
    pub model_id: usize,
    pub n_features: usize,
}

impl TreeEnsemble {
    pub fn predict(&self, lags: &[f64]) -> Result<f64> {
        if lags.len() != self.n_features {
            return Err(TsmsError::DimensionMismatch {
                got: lags.len(),
                expected: self.n_features,
            });
        }
        let mut out = self.base_offset;
        for (tree, w) in self.trees.iter().zip(&self.tree_weights) {
            out += w * tree.predict(lags);
        }
        Ok(out)
    }
}

/// Per-feature half-open intervals `(lo, hi]` within which single-feature
/// perturbations leave every realized root-to-leaf path unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct StabilityIntervals {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Intersect, over every tree, the path constraints realized by `lags`.
///
/// The result is a sufficient stability region: replacing `lags[j]` by any
/// value in `(lo[j], hi[j]]` cannot change any tree's routing, hence the
/// ensemble prediction is unchanged exactly.
pub fn stability_intervals(model: &TreeEnsemble, lags: &[f64]) -> Result<StabilityIntervals> {
    if lags.len() != model.n_features {
        return Err(TsmsError::DimensionMismatch {
            got: lags.len(),
            expected: model.n_features,
        });
    }
    let mut lo = vec![f64::NEG_INFINITY; lags.len()];
    let mut hi = vec![f64::INFINITY; lags.len()];
    for tree in &model.trees {
        let mut at = 0;
        loop {
            match tree.nodes[at] {
                Node::Leaf { .. } => break,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if lags[feature] <= threshold {
                        hi[feature] = hi[feature].min(threshold);
                        at = left;
                    } else {
                        lo[feature] = lo[feature].max(threshold);
                        at = right;
                    }
                }
            }
        }
    }
    Ok(StabilityIntervals { lo, hi })
}

fn validate_training_set(windows: &[LagWindow]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if windows.is_empty() {
        return Err(TsmsError::EmptyTrainingSet);
    }
    for w in windows {
        if w.label.len() != 1 {
            return Err(TsmsError::UnsupportedHorizon {
                horizon: w.label.len(),
            });
        }
    }
    let features = windows.iter().map(|w| w.lags.clone()).collect();
    let targets = windows.iter().map(|w| w.label[0]).collect();
    Ok((features, targets))
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

fn node_sse(targets: &[f64], samples: &[usize]) -> f64 {
    let m = mean(samples.iter().map(|&i| targets[i]), samples.len());
    samples
        .iter()
        .map(|&i| (targets[i] - m) * (targets[i] - m))
        .sum()
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn find_best_split(features: &[Vec<f64>], targets: &[f64], samples: &[usize]) -> Option<BestSplit> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let n_features = features[samples[0]].len();
    let parent_sse = node_sse(targets, samples);
    let scale = parent_sse.max(1.0);
    let mut best: Option<BestSplit> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..n_features {
        pairs.clear();
        pairs.extend(samples.iter().map(|&i| (features[i][feature], targets[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
        for i in 1..n {
            left_sum += pairs[i - 1].1;
            left_sq += pairs[i - 1].1 * pairs[i - 1].1;
            if pairs[i].0 <= pairs[i - 1].0 {
                continue;
            }
            let threshold = 0.5 * (pairs[i - 1].0 + pairs[i].0);
            let nl = i as f64;
            let nr = (n - i) as f64;
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse_l = left_sq - left_sum * left_sum / nl;
            let sse_r = right_sq - right_sum * right_sum / nr;
            let gain = parent_sse - sse_l - sse_r;
            // Strictly-greater keeps the first (lowest feature, lowest
            // threshold) candidate on ties; tiny gains are numeric noise.
            let improved = match &best {
                None => gain > scale * 1e-12,
                Some(b) => gain > b.gain,
            };
            if improved {
                best = Some(BestSplit {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

fn grow(
    features: &[Vec<f64>],
    targets: &[f64],
    samples: Vec<usize>,
    depth: usize,
    max_depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let leaf_value = mean(samples.iter().map(|&i| targets[i]), samples.len());
    if depth >= max_depth || samples.len() < 2 {
        nodes.push(Node::Leaf { value: leaf_value });
        return nodes.len() - 1;
    }
    let Some(split) = find_best_split(features, targets, &samples) else {
        nodes.push(Node::Leaf { value: leaf_value });
        return nodes.len() - 1;
    };
    let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
        .into_iter()
        .partition(|&i| features[i][split.feature] <= split.threshold);
    let at = nodes.len();
    nodes.push(Node::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: 0,
        right: 0,
    });
    let left = grow(features, targets, left_samples, depth + 1, max_depth, nodes);
    let right = grow(features, targets, right_samples, depth + 1, max_depth, nodes);
    if let Node::Split {
        left: l, right: r, ..
    } = &mut nodes[at]
    {
        *l = left;
        *r = right;
    }
    at
}

fn fit_cart(features: &[Vec<f64>], targets: &[f64], max_depth: usize) -> RegressionTree {
    let mut nodes = Vec::new();
    grow(
        features,
        targets,
        (0..features.len()).collect(),
        0,
        max_depth,
        &mut nodes,
    );
    RegressionTree { nodes, max_depth }
}

/// Greedy variance-reduction CART on scalar targets.
///
/// `seed` is accepted for interface uniformity; the learner itself is
/// deterministic.
pub fn fit_decision_tree(
    windows: &[LagWindow],
    max_depth: usize,
    _seed: u64,
) -> Result<RegressionTree> {
    let (features, targets) = validate_training_set(windows)?;
    Ok(fit_cart(&features, &targets, max_depth))
}

fn single_tree_ensemble(tree: RegressionTree, n_features: usize) -> TreeEnsemble {
    TreeEnsemble {
        kind: EnsembleKind::Single,
        trees: vec![tree],
        tree_weights: vec![1.0],
        base_offset: 0.0,
        model_id: 0,
        n_features,
    }
}

/// Bootstrap aggregation of CART trees; every feature is considered at
/// every split, and each tree draws a same-size resample with replacement
/// from a seed-derived stream.
pub fn fit_random_forest(
    windows: &[LagWindow],
    n_trees: usize,
    max_depth: usize,
    seed: u64,
) -> Result<TreeEnsemble> {
    if n_trees == 0 {
        return Err(TsmsError::InvalidParameters(
            "random forest needs at least one tree".into(),
        ));
    }
    let (features, targets) = validate_training_set(windows)?;
    let n = features.len();
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
        let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let boot_features: Vec<Vec<f64>> = sample.iter().map(|&i| features[i].clone()).collect();
        let boot_targets: Vec<f64> = sample.iter().map(|&i| targets[i]).collect();
        trees.push(fit_cart(&boot_features, &boot_targets, max_depth));
    }
    Ok(TreeEnsemble {
        kind: EnsembleKind::Forest,
        tree_weights: vec![1.0 / n_trees as f64; n_trees],
        trees,
        base_offset: 0.0,
        model_id: 0,
        n_features: windows[0].lags.len(),
    })
}

/// Least-squares boosting: the offset is the target mean, stage `m` fits a
/// CART tree to the current residuals, and predictions accumulate with a
/// constant learning rate.
pub fn fit_gradient_boosting(
    windows: &[LagWindow],
    n_trees: usize,
    max_depth: usize,
    learning_rate: f64,
    _seed: u64,
) -> Result<TreeEnsemble> {
    if !(learning_rate > 0.0 && learning_rate <= 1.0) {
        return Err(TsmsError::InvalidParameters(format!(
            "learning rate must be in (0, 1], got {learning_rate}"
        )));
    }
    let (features, targets) = validate_training_set(windows)?;
    let base_offset = mean(targets.iter().copied(), targets.len());
    let mut residuals: Vec<f64> = targets.iter().map(|t| t - base_offset).collect();
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let tree = fit_cart(&features, &residuals, max_depth);
        for (i, f) in features.iter().enumerate() {
            residuals[i] -= learning_rate * tree.predict(f);
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        kind: EnsembleKind::Gbt,
        tree_weights: vec![learning_rate; n_trees],
        trees,
        base_offset,
        model_id: 0,
        n_features: windows[0].lags.len(),
    })
}

/// One row of the pool configuration grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub kind: EnsembleKind,
    pub max_depth: usize,
    pub n_trees: usize,
}

/// The 21 pool configurations in row-major grid order: single trees with
/// depth {4, 8, 16}, then forests and boosted ensembles over
/// depth {2, 4, 6} x trees {16, 32, 64}.
pub fn pool_configs() -> Vec<PoolEntry> {
    let mut entries = Vec::with_capacity(21);
    for max_depth in [4, 8, 16] {
        entries.push(PoolEntry {
            kind: EnsembleKind::Single,
            max_depth,
            n_trees: 1,
        });
    }
    for kind in [EnsembleKind::Forest, EnsembleKind::Gbt] {
        for max_depth in [2, 4, 6] {
            for n_trees in [16, 32, 64] {
                entries.push(PoolEntry {
                    kind,
                    max_depth,
                    n_trees,
                });
            }
        }
    }
    entries
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPool {
    pub models: Vec<TreeEnsemble>,
    pub seed: u64,
}

impl ModelPool {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Model lookup by one-based id.
    pub fn model(&self, model_id: usize) -> &TreeEnsemble {
        &self.models[model_id - 1]
    }
}

fn derive_model_seed(seed: u64, model_id: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(model_id as u64)
}

pub fn build_model_pool(windows: &[LagWindow], seed: u64) -> Result<ModelPool> {
    build_model_pool_with(windows, seed, DEFAULT_LEARNING_RATE)
}

/// Train all 21 pool members with per-model derived seeds; ids follow the
/// grid order of [`pool_configs`].
pub fn build_model_pool_with(
    windows: &[LagWindow],
    seed: u64,
    learning_rate: f64,
) -> Result<ModelPool> {
    let mut models = Vec::with_capacity(21);
    for (i, entry) in pool_configs().into_iter().enumerate() {
        let model_id = i + 1;
        let model_seed = derive_model_seed(seed, model_id);
        let mut model = match entry.kind {
            EnsembleKind::Single => {
                let tree = fit_decision_tree(windows, entry.max_depth, model_seed)?;
                single_tree_ensemble(tree, windows[0].lags.len())
            }
            EnsembleKind::Forest => {
                fit_random_forest(windows, entry.n_trees, entry.max_depth, model_seed)?
            }
            EnsembleKind::Gbt => fit_gradient_boosting(
                windows,
                entry.n_trees,
                entry.max_depth,
                learning_rate,
                model_seed,
            )?,
        };
        model.model_id = model_id;
        models.push(model);
    }
    Ok(ModelPool { models, seed })
}

/// Serialize a pool to a structured-text dump whose round-trip is bit-exact
/// on predictions.
pub fn save_model_pool(pool: &ModelPool, path: &std::path::Path) -> Result<()> {
    let payload = serde_json::to_string(pool)
        .map_err(|e| TsmsError::InvalidParameters(format!("serialization failed: {e}")))?;
    std::fs::write(path, format!("tsms-pool v1\n{payload}\n"))?;
    Ok(())
}

pub fn load_model_pool(path: &std::path::Path) -> Result<ModelPool> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.splitn(2, '\n');
    let header = lines.next().unwrap_or_default();
    if header != "tsms-pool v1" {
        return Err(TsmsError::ParseError {
            line: 1,
            message: format!("unexpected header {header:?}"),
        });
    }
    let body = lines.next().unwrap_or_default();
    serde_json::from_str(body.trim_end()).map_err(|e| TsmsError::ParseError {
        line: 2,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn windows_from(pairs: &[(&[f64], f64)]) -> Vec<LagWindow> {
        pairs
            .iter()
            .map(|(lags, label)| LagWindow {
                lags: lags.to_vec(),
                label: vec![*label],
                t_end: 0,
            })
            .collect()
    }

    /// Exhaustive depth-1 split search used as the oracle for CART.
    fn best_split_oracle(windows: &[LagWindow]) -> Option<(usize, f64, f64)> {
        let n = windows.len();
        let n_features = windows[0].lags.len();
        let targets: Vec<f64> = windows.iter().map(|w| w.label[0]).collect();
        let m = targets.iter().sum::<f64>() / n as f64;
        let parent: f64 = targets.iter().map(|t| (t - m) * (t - m)).sum();
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..n_features {
            let mut values: Vec<f64> = windows.iter().map(|w| w.lags[f]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for pair in values.windows(2) {
                let thr = 0.5 * (pair[0] + pair[1]);
                let (mut ls, mut ln, mut rs, mut rn) = (0.0, 0usize, 0.0, 0usize);
                for w in windows {
                    if w.lags[f] <= thr {
                        ls += w.label[0];
                        ln += 1;
                    } else {
                        rs += w.label[0];
                        rn += 1;
                    }
                }
                let (lm, rm) = (ls / ln as f64, rs / rn as f64);
                let sse: f64 = windows
                    .iter()
                    .map(|w| {
                        let c = if w.lags[f] <= thr { lm } else { rm };
                        (w.label[0] - c) * (w.label[0] - c)
                    })
                    .sum();
                let gain = parent - sse;
                if best.map_or(gain > 1e-12, |b| gain > b.2) {
                    best = Some((f, thr, gain));
                }
            }
        }
        best
    }

    #[test]
    fn constant_targets_single_leaf() {
        let w = windows_from(&[(&[0.0, 1.0], 7.0), (&[1.0, 0.0], 7.0), (&[2.0, 5.0], 7.0)]);
        let tree = fit_decision_tree(&w, 4, 0).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.predict(&[9.0, -3.0]), 7.0);
    }

    #[test]
    fn depth1_split_matches_oracle() {
        let w = windows_from(&[(&[0.0], 0.0), (&[1.0], 0.0), (&[2.0], 1.0), (&[3.0], 1.0)]);
        let tree = fit_decision_tree(&w, 1, 0).unwrap();
        match tree.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 1.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(tree.predict(&[0.5]), 0.0);
        assert_eq!(tree.predict(&[2.5]), 1.0);
        let (of, ot, _) = best_split_oracle(&w).unwrap();
        assert_eq!((of, ot), (0, 1.5));
    }

    #[test]
    fn depth1_optimality_random_data() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n = rng.gen_range(4..40);
            let windows: Vec<LagWindow> = (0..n)
                .map(|_| LagWindow {
                    lags: (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                    label: vec![rng.gen_range(-2.0..2.0)],
                    t_end: 0,
                })
                .collect();
            let tree = fit_decision_tree(&windows, 1, 0).unwrap();
            let oracle = best_split_oracle(&windows);
            match (&tree.nodes()[0], oracle) {
                (
                    Node::Split {
                        feature, threshold, ..
                    },
                    Some((of, ot, _)),
                ) => {
                    assert_eq!(*feature, of);
                    assert!((threshold - ot).abs() < 1e-12);
                }
                (Node::Leaf { .. }, None) => {}
                other => panic!("tree/oracle disagreement: {other:?}"),
            }
        }
    }

    #[test]
    fn depth_zero_is_target_mean() {
        let w = windows_from(&[(&[0.0], 1.0), (&[1.0], 3.0)]);
        let tree = fit_decision_tree(&w, 0, 0).unwrap();
        assert_eq!(tree.predict(&[0.0]), 2.0);
    }

    #[test]
    fn empty_training_set_rejected() {
        assert!(matches!(
            fit_decision_tree(&[], 2, 0),
            Err(TsmsError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn horizon_above_one_rejected() {
        let w = vec![LagWindow {
            lags: vec![0.0],
            label: vec![1.0, 2.0],
            t_end: 0,
        }];
        assert!(matches!(
            fit_decision_tree(&w, 2, 0),
            Err(TsmsError::UnsupportedHorizon { horizon: 2 })
        ));
    }

    #[test]
    fn forest_constant_targets_and_determinism() {
        let w = windows_from(&[(&[0.0, 1.0], 3.0), (&[1.0, 2.0], 3.0), (&[2.0, 0.0], 3.0)]);
        let f1 = fit_random_forest(&w, 8, 3, 42).unwrap();
        let f2 = fit_random_forest(&w, 8, 3, 42).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.predict(&[5.0, 5.0]).unwrap(), 3.0);
    }

    #[test]
    fn forest_not_much_worse_than_single_tree() {
        // Linear trend: trees can fit it closely; bagging should stay within
        // a small margin of the single tree's training RMSE.
        let windows: Vec<LagWindow> = (0..80)
            .map(|i| {
                let x = i as f64 * 0.05;
                LagWindow {
                    lags: vec![x, x + 0.05],
                    label: vec![x + 0.1],
                    t_end: 0,
                }
            })
            .collect();
        let rmse = |m: &TreeEnsemble| -> f64 {
            let sse: f64 = windows
                .iter()
                .map(|w| {
                    let p = m.predict(&w.lags).unwrap();
                    (p - w.label[0]) * (p - w.label[0])
                })
                .sum();
            (sse / windows.len() as f64).sqrt()
        };
        let single = single_tree_ensemble(fit_decision_tree(&windows, 4, 0).unwrap(), 2);
        let forest = fit_random_forest(&windows, 16, 4, 3).unwrap();
        assert!(rmse(&forest) <= rmse(&single) + 0.1);
    }

    #[test]
    fn gbt_constant_targets() {
        let w = windows_from(&[(&[0.0], 2.0), (&[1.0], 2.0)]);
        let g = fit_gradient_boosting(&w, 4, 2, 0.1, 0).unwrap();
        assert_eq!(g.base_offset, 2.0);
        assert_eq!(g.predict(&[0.5]).unwrap(), 2.0);
    }

    #[test]
    fn gbt_zero_stages_is_target_mean() {
        let w = windows_from(&[(&[0.0], 1.0), (&[1.0], 5.0)]);
        let g = fit_gradient_boosting(&w, 0, 2, 0.1, 0).unwrap();
        assert_eq!(g.predict(&[9.0]).unwrap(), 3.0);
    }

    #[test]
    fn gbt_matches_residual_chain_oracle() {
        // Two boosting stages on a 4-point dataset, checked against an
        // independently computed residual chain.
        let w = windows_from(&[(&[0.0], 0.0), (&[1.0], 1.0), (&[2.0], 3.0), (&[3.0], 6.0)]);
        let lr = 0.5;
        let g = fit_gradient_boosting(&w, 2, 1, lr, 0).unwrap();
        // Oracle: stage trees fitted by hand through the same CART learner,
        // chaining residuals without going through the boosting code path.
        let targets = [0.0, 1.0, 3.0, 6.0];
        let base = targets.iter().sum::<f64>() / 4.0;
        let mut residuals: Vec<f64> = targets.iter().map(|t| t - base).collect();
        let features: Vec<Vec<f64>> = w.iter().map(|x| x.lags.clone()).collect();
        let mut staged: Vec<RegressionTree> = Vec::new();
        for _ in 0..2 {
            let t = fit_cart(&features, &residuals, 1);
            for (i, f) in features.iter().enumerate() {
                residuals[i] -= lr * t.predict(f);
            }
            staged.push(t);
        }
        for f in &features {
            let expect = base + lr * staged[0].predict(f) + lr * staged[1].predict(f);
            assert!((g.predict(f).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn gbt_training_sse_non_increasing() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let windows: Vec<LagWindow> = (0..60)
            .map(|_| LagWindow {
                lags: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: vec![rng.gen_range(-1.0..1.0)],
                t_end: 0,
            })
            .collect();
        let full = fit_gradient_boosting(&windows, 20, 3, 0.3, 0).unwrap();
        let mut prev = f64::INFINITY;
        for m in 0..=20 {
            let sse: f64 = windows
                .iter()
                .map(|w| {
                    let mut p = full.base_offset;
                    for t in 0..m {
                        p += 0.3 * full.trees[t].predict(&w.lags);
                    }
                    (p - w.label[0]) * (p - w.label[0])
                })
                .sum();
            assert!(sse <= prev + 1e-9, "SSE increased at stage {m}");
            prev = sse;
        }
    }

    #[test]
    fn predict_path_and_boundary() {
        let tree = RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 2,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
            ],
            max_depth: 1,
        };
        assert_eq!(tree.predict(&[0.0, 0.0, 0.2]), 1.0);
        // A value exactly on the threshold routes left.
        assert_eq!(tree.predict(&[0.0, 0.0, 0.5]), 1.0);
        let forest = TreeEnsemble {
            kind: EnsembleKind::Forest,
            trees: vec![
                tree.clone(),
                RegressionTree {
                    nodes: vec![
                        Node::Split {
                            feature: 2,
                            threshold: 0.5,
                            left: 1,
                            right: 2,
                        },
                        Node::Leaf { value: 3.0 },
                        Node::Leaf { value: 4.0 },
                    ],
                    max_depth: 1,
                },
            ],
            tree_weights: vec![0.5, 0.5],
            base_offset: 0.0,
            model_id: 1,
            n_features: 3,
        };
        assert_eq!(forest.predict(&[0.0, 0.0, 0.7]).unwrap(), 3.0);
        assert!(matches!(
            forest.predict(&[0.0, 0.0]),
            Err(TsmsError::DimensionMismatch { got: 2, expected: 3 })
        ));
    }

    #[test]
    fn prediction_decomposition() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let windows: Vec<LagWindow> = (0..50)
            .map(|_| LagWindow {
                lags: (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: vec![rng.gen_range(-1.0..1.0)],
                t_end: 0,
            })
            .collect();
        let g = fit_gradient_boosting(&windows, 10, 3, 0.2, 1).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let direct = g.predict(&x).unwrap();
            let manual: f64 = g.base_offset
                + g.trees
                    .iter()
                    .zip(&g.tree_weights)
                    .map(|(t, w)| w * t.predict(&x))
                    .sum::<f64>();
            assert!((direct - manual).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_interval_single_and_intersection() {
        let tree_at = |thr: f64| RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 2,
                    threshold: thr,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 2.0 },
            ],
            max_depth: 1,
        };
        let single = TreeEnsemble {
            kind: EnsembleKind::Single,
            trees: vec![tree_at(0.5)],
            tree_weights: vec![1.0],
            base_offset: 0.0,
            model_id: 1,
            n_features: 4,
        };
        let s = stability_intervals(&single, &[0.0, 0.0, 0.2, 0.0]).unwrap();
        assert_eq!(s.hi[2], 0.5);
        assert_eq!(s.lo[2], f64::NEG_INFINITY);
        assert_eq!(s.hi[0], f64::INFINITY);

        let two = TreeEnsemble {
            kind: EnsembleKind::Forest,
            trees: vec![tree_at(0.5), tree_at(0.3)],
            tree_weights: vec![0.5, 0.5],
            base_offset: 0.0,
            model_id: 1,
            n_features: 4,
        };
        let s = stability_intervals(&two, &[0.0, 0.0, 0.2, 0.0]).unwrap();
        assert_eq!(s.hi[2], 0.3);
    }

    #[test]
    fn stability_interval_soundness_sampled() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let windows: Vec<LagWindow> = (0..60)
            .map(|_| LagWindow {
                lags: (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                label: vec![rng.gen_range(-1.0..1.0)],
                t_end: 0,
            })
            .collect();
        let model = fit_random_forest(&windows, 8, 4, 9).unwrap();
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = model.predict(&x).unwrap();
        let iv = stability_intervals(&model, &x).unwrap();
        for _ in 0..100 {
            let j = rng.gen_range(0..5);
            let lo = iv.lo[j].max(-10.0);
            let hi = iv.hi[j].min(10.0);
            let mut probe = x.clone();
            // Sample inside (lo, hi]; the hi endpoint itself is included.
            probe[j] = lo + (hi - lo) * rng.gen_range(0.0f64..1.0).max(1e-9);
            assert_eq!(model.predict(&probe).unwrap(), base);
        }
    }

    #[test]
    fn pool_shape_and_determinism() {
        let windows: Vec<LagWindow> = (0..40)
            .map(|i| {
                let x = (i as f64 * 0.3).sin();
                LagWindow {
                    lags: vec![x, x * 0.5, -x],
                    label: vec![x * 0.9],
                    t_end: 0,
                }
            })
            .collect();
        let pool = build_model_pool(&windows, 123).unwrap();
        assert_eq!(pool.len(), 21);
        let singles: Vec<&TreeEnsemble> = pool
            .models
            .iter()
            .filter(|m| m.kind == EnsembleKind::Single)
            .collect();
        assert_eq!(singles.len(), 3);
        assert_eq!(
            singles.iter().map(|m| m.trees[0].max_depth).collect::<Vec<_>>(),
            vec![4, 8, 16]
        );
        assert_eq!(
            pool.models
                .iter()
                .filter(|m| m.kind == EnsembleKind::Forest)
                .count(),
            9
        );
        assert_eq!(
            pool.models
                .iter()
                .filter(|m| m.kind == EnsembleKind::Gbt)
                .count(),
            9
        );
        for (i, m) in pool.models.iter().enumerate() {
            assert_eq!(m.model_id, i + 1);
        }
        let pool2 = build_model_pool(&windows, 123).unwrap();
        let probe = vec![0.3, -0.2, 0.8];
        for (a, b) in pool.models.iter().zip(&pool2.models) {
            assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap());
        }
    }

    #[test]
    fn pool_serialization_round_trip() {
        let windows: Vec<LagWindow> = (0..30)
            .map(|i| {
                let x = (i as f64 * 0.7).sin();
                LagWindow {
                    lags: vec![x, x * x],
                    label: vec![x * 0.5 + 0.1],
                    t_end: 0,
                }
            })
            .collect();
        let pool = build_model_pool(&windows, 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.json");
        save_model_pool(&pool, &path).unwrap();
        let loaded = load_model_pool(&path).unwrap();
        assert_eq!(pool, loaded);
        let probe = vec![0.25, 0.0625];
        for (a, b) in pool.models.iter().zip(&loaded.models) {
            assert_eq!(
                a.predict(&probe).unwrap().to_bits(),
                b.predict(&probe).unwrap().to_bits()
            );
        }
    }
}
