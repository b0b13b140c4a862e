//! Exact interventional Shapley values for tree ensembles.
//!
//! Two value functions are supported: the expected prediction over a
//! background set, and the expected squared loss against a target. Values
//! are computed by full coalition enumeration, so results match the
//! game-theoretic definition exactly (up to a fixed floating-point summation
//! order). The enumeration is made affordable by contracting each tree
//! against a (instance, background row) pair: only features on which the
//! two disagree about routing can influence the hybrid evaluation, so each
//! background row reduces to a small lookup table indexed by the coalition
//! restricted to those features.
//!
//! [`shapley_oracle`] is a deliberately naive, cache-free transcription of
//! the definition and serves as the independent ground truth in tests.

use crate::error::{Result, TsmsError};
use crate::series::LagWindow;
use crate::tree::{Node, RegressionTree, TreeEnsemble};
use rand::{seq::index::sample, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Enumeration bound for [`shapley_values`].
pub const MAX_ENUM_FEATURES: usize = 25;
/// Enumeration bound for the cache-free [`shapley_oracle`].
pub const MAX_ORACLE_FEATURES: usize = 12;
/// Default background subsample size.
pub const DEFAULT_BACKGROUND_CAP: usize = 25;

/// Which set function is being attributed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Prediction,
    Loss,
}

/// A subset of feature indices, stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coalition {
    mask: u32,
}

impl Coalition {
    pub fn empty() -> Self {
        Self { mask: 0 }
    }

    pub fn full(n_features: usize) -> Self {
        Self {
            mask: if n_features == 32 {
                u32::MAX
            } else {
                (1u32 << n_features) - 1
            },
        }
    }

    pub fn from_mask(mask: u32) -> Self {
        Self { mask }
    }

    pub fn from_members(members: &[usize]) -> Self {
        let mut mask = 0;
        for &m in members {
            mask |= 1 << m;
        }
        Self { mask }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn contains(&self, feature: usize) -> bool {
        self.mask >> feature & 1 == 1
    }
}

/// Reference rows over which interventional expectations are averaged.
#[derive(Clone, Debug)]
pub struct BackgroundSet {
    rows: Vec<Vec<f64>>,
    pub cap: usize,
    pub seed: u64,
}

impl BackgroundSet {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(TsmsError::EmptyBackground);
        }
        let cap = rows.len();
        Ok(Self { rows, cap, seed: 0 })
    }

    /// Draw at most `cap` lag rows uniformly (without replacement) from the
    /// training windows, recording the subsampling seed.
    pub fn from_windows(windows: &[LagWindow], cap: usize, seed: u64) -> Result<Self> {
        if windows.is_empty() || cap == 0 {
            return Err(TsmsError::EmptyBackground);
        }
        let rows = if windows.len() <= cap {
            windows.iter().map(|w| w.lags.clone()).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> = sample(&mut rng, windows.len(), cap).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| windows[i].lags.clone()).collect()
        };
        Ok(Self { rows, cap, seed })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Per-lag attribution of a value function.
#[derive(Clone, Debug, PartialEq)]
pub struct Explanation {
    pub phi: Vec<f64>,
    pub kind: ValueKind,
    /// `v(empty coalition)`.
    pub base_value: f64,
    pub target: Option<f64>,
}

impl Explanation {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

fn check_inputs(
    model: &TreeEnsemble,
    background: &BackgroundSet,
    x: &[f64],
    y: Option<f64>,
    kind: ValueKind,
) -> Result<()> {
    if background.is_empty() {
        return Err(TsmsError::EmptyBackground);
    }
    if x.len() != model.n_features {
        return Err(TsmsError::DimensionMismatch {
            got: x.len(),
            expected: model.n_features,
        });
    }
    for row in background.rows() {
        if row.len() != model.n_features {
            return Err(TsmsError::DimensionMismatch {
                got: row.len(),
                expected: model.n_features,
            });
        }
    }
    if kind == ValueKind::Loss && y.is_none() {
        return Err(TsmsError::MissingTarget);
    }
    Ok(())
}

/// Evaluate the interventional value function directly.
///
/// Builds the hybrid input for every background row (coalition features
/// from `x`, the rest from the row) and averages the model output, or the
/// squared loss against `y` for [`ValueKind::Loss`].
pub fn eval_value_function(
    model: &TreeEnsemble,
    background: &BackgroundSet,
    x: &[f64],
    y: Option<f64>,
    coalition: Coalition,
    kind: ValueKind,
) -> Result<f64> {
    check_inputs(model, background, x, y, kind)?;
    let mut hybrid = vec![0.0; x.len()];
    let mut acc = 0.0;
    for row in background.rows() {
        for j in 0..x.len() {
            hybrid[j] = if coalition.contains(j) { x[j] } else { row[j] };
        }
        let g = model.predict(&hybrid)?;
        acc += match kind {
            ValueKind::Prediction => g,
            ValueKind::Loss => {
                let d = g - y.expect("checked above");
                d * d
            }
        };
    }
    Ok(acc / background.len() as f64)
}

/// Exact Shapley weights `1 / (n * C(n-1, s))` for coalition sizes `0..n`.
fn shapley_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|s| 1.0 / (n as f64 * binomial(n - 1, s)))
        .collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as f64
}

/// A tree contracted against one (instance, background row) pair.
///
/// Nodes that route `x` and the row identically are collapsed; what remains
/// branches only on coalition membership of the diverging features, encoded
/// as dense bit positions.
enum ReducedNode {
    Split {
        bit: u32,
        in_child: usize,
        out_child: usize,
    },
    Leaf(f64),
}

struct ReducedTree {
    nodes: Vec<ReducedNode>,
    weight: f64,
}

impl ReducedTree {
    fn eval(&self, mask: u32) -> f64 {
        let mut at = self.nodes.len() - 1;
        loop {
            match self.nodes[at] {
                ReducedNode::Leaf(v) => return v,
                ReducedNode::Split {
                    bit,
                    in_child,
                    out_child,
                } => {
                    at = if mask >> bit & 1 == 1 { in_child } else { out_child };
                }
            }
        }
    }
}

/// Collect the features on which `x` and `z` disagree about routing
/// anywhere on a reachable hybrid path.
fn collect_diverging(tree: &RegressionTree, x: &[f64], z: &[f64], mask: &mut u32) {
    fn go(nodes: &[Node], at: usize, x: &[f64], z: &[f64], mask: &mut u32) {
        match nodes[at] {
            Node::Leaf { .. } => {}
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let xl = x[feature] <= threshold;
                let zl = z[feature] <= threshold;
                if xl == zl {
                    go(nodes, if xl { left } else { right }, x, z, mask);
                } else {
                    *mask |= 1 << feature;
                    go(nodes, left, x, z, mask);
                    go(nodes, right, x, z, mask);
                }
            }
        }
    }
    go(tree.nodes(), 0, x, z, mask);
}

/// Contract `tree` against `(x, z)`, mapping diverging features to dense
/// bits via `bit_of`. The root ends up last in the arena.
fn contract(tree: &RegressionTree, x: &[f64], z: &[f64], bit_of: &[u32], weight: f64) -> ReducedTree {
    fn go(nodes: &[Node], at: usize, x: &[f64], z: &[f64], bit_of: &[u32], out: &mut Vec<ReducedNode>) -> usize {
        match nodes[at] {
            Node::Leaf { value } => {
                out.push(ReducedNode::Leaf(value));
                out.len() - 1
            }
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let xl = x[feature] <= threshold;
                let zl = z[feature] <= threshold;
                if xl == zl {
                    go(nodes, if xl { left } else { right }, x, z, bit_of, out)
                } else {
                    let x_side = if xl { left } else { right };
                    let z_side = if zl { left } else { right };
                    let in_child = go(nodes, x_side, x, z, bit_of, out);
                    let out_child = go(nodes, z_side, x, z, bit_of, out);
                    out.push(ReducedNode::Split {
                        bit: bit_of[feature],
                        in_child,
                        out_child,
                    });
                    out.len() - 1
                }
            }
        }
    }
    let mut nodes = Vec::new();
    go(tree.nodes(), 0, x, z, bit_of, &mut nodes);
    ReducedTree { nodes, weight }
}

/// Software PEXT: gather the bits of `mask` selected by `sel` into the low
/// positions, in ascending bit order.
fn pext(mask: u32, mut sel: u32) -> u32 {
    let mut out = 0;
    let mut k = 0;
    while sel != 0 {
        let b = sel.trailing_zeros();
        out |= (mask >> b & 1) << k;
        k += 1;
        sel &= sel - 1;
    }
    out
}

/// Per-background-row ensemble lookup table over the diverging features.
struct RowTable {
    dmask: u32,
    values: Vec<f64>,
}

fn build_row_table(model: &TreeEnsemble, x: &[f64], z: &[f64]) -> RowTable {
    let mut dmask: u32 = 0;
    for tree in &model.trees {
        collect_diverging(tree, x, z, &mut dmask);
    }
    let mut bit_of = vec![0u32; x.len()];
    let mut k = 0;
    for f in 0..x.len() {
        if dmask >> f & 1 == 1 {
            bit_of[f] = k;
            k += 1;
        }
    }
    let reduced: Vec<ReducedTree> = model
        .trees
        .iter()
        .zip(&model.tree_weights)
        .map(|(t, &w)| contract(t, x, z, &bit_of, w))
        .collect();
    let mut values = vec![0.0; 1usize << k];
    for (m, slot) in values.iter_mut().enumerate() {
        let mut acc = model.base_offset;
        for rt in &reduced {
            acc += rt.weight * rt.eval(m as u32);
        }
        *slot = acc;
    }
    RowTable { dmask, values }
}

/// Exact Shapley values by full coalition enumeration.
///
/// Background rows are contracted into per-row tables first, so the
/// `2^L` scan costs a table lookup per row per coalition. The result
/// equals the definitional sum exactly, with a fixed summation order.
pub fn shapley_values(
    model: &TreeEnsemble,
    background: &BackgroundSet,
    x: &[f64],
    y: Option<f64>,
    kind: ValueKind,
) -> Result<Explanation> {
    check_inputs(model, background, x, y, kind)?;
    let n = x.len();
    if n > MAX_ENUM_FEATURES {
        return Err(TsmsError::TooManyFeatures {
            got: n,
            max: MAX_ENUM_FEATURES,
        });
    }
    let tables: Vec<RowTable> = background
        .rows()
        .iter()
        .map(|z| build_row_table(model, x, z))
        .collect();
    let inv_rows = 1.0 / background.len() as f64;
    let n_coalitions = 1usize << n;
    let mut vs = vec![0.0; n_coalitions];
    for (s, slot) in vs.iter_mut().enumerate() {
        let mask = s as u32;
        let mut acc = 0.0;
        for table in &tables {
            let g = table.values[pext(mask, table.dmask) as usize];
            acc += match kind {
                ValueKind::Prediction => g,
                ValueKind::Loss => {
                    let d = g - y.expect("checked above");
                    d * d
                }
            };
        }
        *slot = acc * inv_rows;
    }
    let weights = shapley_weights(n);
    let mut phi = vec![0.0; n];
    for s in 0..n_coalitions {
        let size = (s as u32).count_ones() as usize;
        if size == n {
            // The full coalition excludes no player; no marginal terms.
            continue;
        }
        let w = weights[size];
        for (i, phi_i) in phi.iter_mut().enumerate() {
            if s >> i & 1 == 0 {
                *phi_i += w * (vs[s | 1 << i] - vs[s]);
            }
        }
    }
    Ok(Explanation {
        phi,
        kind,
        base_value: vs[0],
        target: y,
    })
}

/// Literal, cache-free transcription of the Shapley definition.
///
/// Iterates every coalition excluding each player and evaluates both value
/// function calls from scratch. Ground truth for [`shapley_values`];
/// factorial-style cost limits it to [`MAX_ORACLE_FEATURES`] features.
pub fn shapley_oracle(
    model: &TreeEnsemble,
    background: &BackgroundSet,
    x: &[f64],
    y: Option<f64>,
    kind: ValueKind,
) -> Result<Explanation> {
    check_inputs(model, background, x, y, kind)?;
    let n = x.len();
    if n > MAX_ORACLE_FEATURES {
        return Err(TsmsError::TooManyFeatures {
            got: n,
            max: MAX_ORACLE_FEATURES,
        });
    }
    let weights = shapley_weights(n);
    let mut phi = vec![0.0; n];
    for (i, phi_i) in phi.iter_mut().enumerate() {
        for s in 0..1u32 << n {
            if s >> i & 1 == 1 {
                continue;
            }
            let with_i = eval_value_function(
                model,
                background,
                x,
                y,
                Coalition::from_mask(s | 1 << i),
                kind,
            )?;
            let without_i =
                eval_value_function(model, background, x, y, Coalition::from_mask(s), kind)?;
            *phi_i += weights[s.count_ones() as usize] * (with_i - without_i);
        }
    }
    let base_value =
        eval_value_function(model, background, x, y, Coalition::empty(), kind)?;
    Ok(Explanation {
        phi,
        kind,
        base_value,
        target: y,
    })
}

/// Prediction-kind Shapley values via per-tree games combined by the
/// Linearity axiom.
///
/// Each (tree, background row) pair defines a game over its few diverging
/// features; those small games are solved exactly and summed with the tree
/// weights. Mathematically identical to whole-ensemble enumeration, but
/// polynomially cheaper, so this is the path used for per-step
/// explanations.
pub fn shapley_prediction_linear(
    model: &TreeEnsemble,
    background: &BackgroundSet,
    x: &[f64],
) -> Result<Explanation> {
    check_inputs(model, background, x, None, ValueKind::Prediction)?;
    let n = x.len();
    let inv_rows = 1.0 / background.len() as f64;
    let mut phi = vec![0.0; n];
    let mut base_value = model.base_offset;
    let mut bit_of = vec![0u32; n];
    for z in background.rows() {
        for (tree, &weight) in model.trees.iter().zip(&model.tree_weights) {
            let mut dmask: u32 = 0;
            collect_diverging(tree, x, z, &mut dmask);
            let mut features = Vec::new();
            let mut k = 0u32;
            for f in 0..n {
                if dmask >> f & 1 == 1 {
                    bit_of[f] = k;
                    features.push(f);
                    k += 1;
                }
            }
            let reduced = contract(tree, x, z, &bit_of, weight);
            let k = k as usize;
            let table: Vec<f64> = (0..1usize << k).map(|m| reduced.eval(m as u32)).collect();
            base_value += weight * inv_rows * table[0];
            if k == 0 {
                continue;
            }
            let local_weights = shapley_weights(k);
            for (b, &f) in features.iter().enumerate() {
                let mut local = 0.0;
                for s in 0..1usize << k {
                    if s >> b & 1 == 0 {
                        local += local_weights[(s as u32).count_ones() as usize]
                            * (table[s | 1 << b] - table[s]);
                    }
                }
                phi[f] += weight * inv_rows * local;
            }
        }
    }
    Ok(Explanation {
        phi,
        kind: ValueKind::Prediction,
        base_value,
        target: None,
    })
}
