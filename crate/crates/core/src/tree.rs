//! Regression trees grown best-first on per-era gradient histograms.

use std::cmp::Ordering;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::BinnedDataset;
use crate::config::{SplitType, TrainConfig};
use crate::criteria::{
    boltzmann, era_gain, original_gain, split_direction, GradAggregate,
};

/// Rows above which histogram construction fans out across features.
const PARALLEL_ROWS: usize = 2048;

/// Gradient sums per (feature, era, bin) for the rows of one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    n_eras: usize,
    features: Vec<usize>,
    n_bins: Vec<usize>,
    /// `cells[k][era * n_bins[k] + bin]` for the k-th feature in `features`.
    cells: Vec<Vec<GradAggregate>>,
}

impl Histogram {
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub fn n_eras(&self) -> usize {
        self.n_eras
    }

    pub fn n_bins(&self, k: usize) -> usize {
        self.n_bins[k]
    }

    /// Cell for the k-th histogram feature.
    pub fn cell(&self, k: usize, era: usize, bin: usize) -> GradAggregate {
        self.cells[k][era * self.n_bins[k] + bin]
    }

    /// Per-bin aggregate with eras pooled.
    pub fn pooled(&self, k: usize, bin: usize) -> GradAggregate {
        (0..self.n_eras).fold(GradAggregate::default(), |acc, j| acc + self.cell(k, j, bin))
    }

    /// Sibling histogram: `self - other`, cell by cell.
    pub fn subtract(&self, other: &Histogram) -> Histogram {
        debug_assert_eq!(self.features, other.features);
        let cells = self
            .cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x - y).collect())
            .collect();
        Histogram {
            cells,
            ..self.clone()
        }
    }
}

/// Builds the (feature, era, bin) histogram for `rows` over `features`.
pub fn build_histogram(
    binned: &BinnedDataset<'_>,
    gradients: &[f64],
    rows: &[usize],
    features: &[usize],
) -> Histogram {
    let eras = binned.source().eras();
    let n_eras = binned.source().n_eras();
    let build_one = |&f: &usize| {
        let nb = binned.n_bins(f);
        let bins = binned.column(f);
        let mut cells = vec![GradAggregate::default(); n_eras * nb];
        for &r in rows {
            cells[eras[r] * nb + bins[r] as usize].push(gradients[r]);
        }
        cells
    };
    let cells = if rows.len() >= PARALLEL_ROWS {
        features.par_iter().map(build_one).collect()
    } else {
        features.iter().map(build_one).collect()
    };
    Histogram {
        n_eras,
        features: features.to_vec(),
        n_bins: features.iter().map(|&f| binned.n_bins(f)).collect(),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature_index: usize,
    /// Rows with `bin <= bin_threshold` go left.
    pub bin_threshold: u32,
    /// Criterion-specific score used to rank candidates.
    pub score: f64,
    /// Pooled-criterion gain of this split, whatever criterion chose it.
    pub pooled_gain: f64,
    pub per_era_gains: Vec<Option<f64>>,
    pub per_era_directions: Vec<Option<i8>>,
    pub left_value: f64,
    pub right_value: f64,
    pub left: GradAggregate,
    pub right: GradAggregate,
}

#[derive(Debug, Clone, Copy)]
struct RankKey {
    score: f64,
    pooled_gain: f64,
    feature: usize,
    bin: u32,
}

impl RankKey {
    /// Higher score, then higher pooled gain, then lower feature, then lower bin.
    fn cmp_rank(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.pooled_gain.total_cmp(&other.pooled_gain))
            .then(other.feature.cmp(&self.feature))
            .then(other.bin.cmp(&self.bin))
    }
}

fn best_of(a: Option<RankKey>, b: Option<RankKey>) -> Option<RankKey> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.cmp_rank(&x) == Ordering::Greater { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Scans one histogram feature and returns its best valid candidate.
fn scan_feature(hist: &Histogram, k: usize, config: &TrainConfig) -> Option<RankKey> {
    let m = hist.n_eras;
    let nb = hist.n_bins[k];
    if nb < 2 {
        return None;
    }
    let lambda = config.l2_regularization;
    let era_totals: Vec<GradAggregate> = (0..m)
        .map(|j| (0..nb).fold(GradAggregate::default(), |acc, b| acc + hist.cell(k, j, b)))
        .collect();
    let total = era_totals.iter().fold(GradAggregate::default(), |acc, &t| acc + t);
    let mut era_left = vec![GradAggregate::default(); m];
    let mut gains = vec![0.0; m];
    let mut best = None;

    'bins: for b in 0..nb - 1 {
        for (j, left) in era_left.iter_mut().enumerate() {
            *left += hist.cell(k, j, b);
        }
        let left = era_left.iter().fold(GradAggregate::default(), |acc, &l| acc + l);
        let right = total - left;
        if left.count < config.min_child_samples || right.count < config.min_child_samples {
            continue;
        }
        let Ok(pooled_gain) = original_gain(&total, &left, &right, lambda) else {
            continue;
        };
        let score = match config.split_type {
            SplitType::Original => pooled_gain,
            SplitType::EraSplit => {
                for j in 0..m {
                    let right_j = era_totals[j] - era_left[j];
                    match era_gain(&era_totals[j], &era_left[j], &right_j, lambda) {
                        Some(g) => gains[j] = g,
                        None => continue 'bins,
                    }
                }
                match boltzmann(&gains, config.boltzmann_alpha) {
                    Ok(s) => s,
                    Err(_) => continue,
                }
            }
            SplitType::DirectionalEraSplit => {
                let mut sum = 0i64;
                for j in 0..m {
                    let right_j = era_totals[j] - era_left[j];
                    if era_left[j].is_empty() || right_j.is_empty() {
                        continue 'bins;
                    }
                    sum += i64::from(split_direction(era_left[j].value(lambda), right_j.value(lambda)));
                }
                if config.directional_gain_floor && pooled_gain <= 0.0 {
                    continue;
                }
                sum.unsigned_abs() as f64 / m as f64
            }
        };
        if !(score > 0.0) {
            continue;
        }
        let key = RankKey {
            score,
            pooled_gain,
            feature: hist.features[k],
            bin: b as u32,
        };
        best = best_of(best, Some(key));
    }
    best
}

/// Fills in the full record for a chosen (feature, bin) pair.
fn describe_split(hist: &Histogram, key: RankKey, lambda: f64) -> SplitCandidate {
    let k = hist.features.iter().position(|&f| f == key.feature).expect("feature in histogram");
    let m = hist.n_eras;
    let nb = hist.n_bins[k];
    let mut per_era_gains = Vec::with_capacity(m);
    let mut per_era_directions = Vec::with_capacity(m);
    let mut left = GradAggregate::default();
    let mut total = GradAggregate::default();
    let mut era_lefts = Vec::with_capacity(m);
    for j in 0..m {
        let era_total = (0..nb).fold(GradAggregate::default(), |acc, b| acc + hist.cell(k, j, b));
        let era_left = (0..=key.bin as usize)
            .fold(GradAggregate::default(), |acc, b| acc + hist.cell(k, j, b));
        let era_right = era_total - era_left;
        per_era_gains.push(era_gain(&era_total, &era_left, &era_right, lambda));
        per_era_directions.push(if era_left.is_empty() || era_right.is_empty() {
            None
        } else {
            Some(split_direction(era_left.value(lambda), era_right.value(lambda)))
        });
        total += era_total;
        era_lefts.push(era_left);
    }
    for l in era_lefts {
        left += l;
    }
    let right = total - left;
    SplitCandidate {
        feature_index: key.feature,
        bin_threshold: key.bin,
        score: key.score,
        pooled_gain: key.pooled_gain,
        per_era_gains,
        per_era_directions,
        left_value: left.value(lambda),
        right_value: right.value(lambda),
        left,
        right,
    }
}

/// Best split of a node under `config.split_type`, or `None` when no
/// candidate satisfies the validity rules.
///
/// Validity: both children hold at least `min_child_samples` rows; the score
/// is strictly positive; the era criteria reject any split that leaves an era
/// with an empty child; directional splitting with `directional_gain_floor`
/// also needs a positive pooled gain. Ties go to the larger pooled gain, then
/// the lower feature index, then the lower bin.
pub fn find_best_split(
    hist: &Histogram,
    node_agg: &GradAggregate,
    config: &TrainConfig,
) -> Option<SplitCandidate> {
    if node_agg.count < 2 || node_agg.count < 2 * config.min_child_samples {
        return None;
    }
    let best = (0..hist.features.len())
        .into_par_iter()
        .map(|k| scan_feature(hist, k, config))
        .reduce(|| None, best_of)?;
    Some(describe_split(hist, best, config.l2_regularization))
}

/// Leaf output `G / (H + lambda)`: the gradient mean when `lambda == 0`.
pub fn leaf_value(agg: &GradAggregate, lambda: f64) -> f64 {
    agg.value(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    /// Node 0 is the root.
    nodes: Vec<TreeNode>,
    n_leaves: usize,
    feature_subset: Vec<usize>,
}

impl RegressionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>, feature_subset: Vec<usize>) -> Self {
        let n_leaves = nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count();
        Self {
            nodes,
            n_leaves,
            feature_subset,
        }
    }

    pub fn leaf(value: f64, feature_subset: Vec<usize>) -> Self {
        Self::from_nodes(vec![TreeNode::Leaf { value }], feature_subset)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    /// Length of the longest root-to-leaf path in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    fn descend(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if value_of(feature) <= threshold { left } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.descend(|f| row[f])
    }

    /// Prediction for row `i` of a column-major matrix.
    pub fn predict_at(&self, columns: &[Vec<f64>], i: usize) -> f64 {
        self.descend(|f| columns[f][i])
    }
}

pub fn predict_tree(tree: &RegressionTree, row: &[f64]) -> f64 {
    tree.predict(row)
}

/// What the grower saw when it expanded one node.
#[derive(Debug)]
pub struct NodeExpansion<'a> {
    pub node_id: usize,
    pub depth: usize,
    pub rows: &'a [usize],
    pub node_agg: GradAggregate,
    pub histogram: &'a Histogram,
    pub split: &'a SplitCandidate,
}

struct Frontier {
    node_id: usize,
    depth: usize,
    rows: Vec<usize>,
    agg: GradAggregate,
    hist: Histogram,
    split: SplitCandidate,
}

/// Features visible to one tree under `colsample_bytree`.
pub fn sample_features<R: Rng + ?Sized>(n_features: usize, colsample: f64, rng: &mut R) -> Vec<usize> {
    let k = ((colsample * n_features as f64).round() as usize).clamp(1, n_features.max(1));
    if k >= n_features {
        return (0..n_features).collect();
    }
    let mut subset = rand::seq::index::sample(rng, n_features, k).into_vec();
    subset.sort_unstable();
    subset
}

/// Grows one tree on `gradients`, drawing its feature subset from `rng`.
pub fn grow_tree<R: Rng + ?Sized>(
    binned: &BinnedDataset<'_>,
    gradients: &[f64],
    config: &TrainConfig,
    rng: &mut R,
) -> RegressionTree {
    let features = sample_features(binned.source().n_features(), config.colsample_bytree, rng);
    grow_tree_with(binned, gradients, config, features, |_| {})
}

/// Best-first growth over a fixed feature subset. `observe` is called once per
/// expanded node, before its rows are partitioned.
pub fn grow_tree_with(
    binned: &BinnedDataset<'_>,
    gradients: &[f64],
    config: &TrainConfig,
    features: Vec<usize>,
    mut observe: impl FnMut(&NodeExpansion<'_>),
) -> RegressionTree {
    let lambda = config.l2_regularization;
    let n = binned.source().n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let agg = GradAggregate::from_grads(rows.iter().map(|&r| gradients[r]));
    let mut nodes = vec![TreeNode::Leaf {
        value: leaf_value(&agg, lambda),
    }];
    let mut frontier: Vec<Frontier> = Vec::new();
    let can_split = |depth: usize, count: usize| {
        config.max_depth.is_none_or(|d| depth < d) && count >= 2 && count >= 2 * config.min_child_samples
    };

    if can_split(0, n) && config.max_leaves > 1 && !features.is_empty() {
        let hist = build_histogram(binned, gradients, &rows, &features);
        if let Some(split) = find_best_split(&hist, &agg, config) {
            frontier.push(Frontier {
                node_id: 0,
                depth: 0,
                rows,
                agg,
                hist,
                split,
            });
        }
    }

    let mut n_leaves = 1;
    while n_leaves < config.max_leaves && !frontier.is_empty() {
        let pick = (0..frontier.len())
            .max_by(|&a, &b| {
                let (x, y) = (&frontier[a], &frontier[b]);
                x.split
                    .score
                    .total_cmp(&y.split.score)
                    .then(x.split.pooled_gain.total_cmp(&y.split.pooled_gain))
                    .then(y.node_id.cmp(&x.node_id))
            })
            .expect("non-empty frontier");
        let leaf = frontier.swap_remove(pick);
        observe(&NodeExpansion {
            node_id: leaf.node_id,
            depth: leaf.depth,
            rows: &leaf.rows,
            node_agg: leaf.agg,
            histogram: &leaf.hist,
            split: &leaf.split,
        });

        let f = leaf.split.feature_index;
        let bin_col = binned.column(f);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf
            .rows
            .iter()
            .partition(|&&r| bin_col[r] <= leaf.split.bin_threshold);
        let left_id = nodes.len();
        let right_id = left_id + 1;
        nodes[leaf.node_id] = TreeNode::Split {
            feature: f,
            threshold: binned.feature_bins()[f].threshold(leaf.split.bin_threshold),
            left: left_id,
            right: right_id,
        };
        n_leaves += 1;

        let depth = leaf.depth + 1;
        let left_agg = GradAggregate::from_grads(left_rows.iter().map(|&r| gradients[r]));
        let right_agg = GradAggregate::from_grads(right_rows.iter().map(|&r| gradients[r]));
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&left_agg, lambda),
        });
        nodes.push(TreeNode::Leaf {
            value: leaf_value(&right_agg, lambda),
        });

        let split_left = can_split(depth, left_rows.len());
        let split_right = can_split(depth, right_rows.len());
        if !(split_left || split_right) {
            continue;
        }
        // build the smaller child directly, derive the larger by subtraction
        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let small = build_histogram(binned, gradients, &left_rows, &features);
            let large = leaf.hist.subtract(&small);
            (small, large)
        } else {
            let small = build_histogram(binned, gradients, &right_rows, &features);
            let large = leaf.hist.subtract(&small);
            (large, small)
        };
        for (id, rows, agg, hist, ok) in [
            (left_id, left_rows, left_agg, left_hist, split_left),
            (right_id, right_rows, right_agg, right_hist, split_right),
        ] {
            if !ok {
                continue;
            }
            if let Some(split) = find_best_split(&hist, &agg, config) {
                frontier.push(Frontier {
                    node_id: id,
                    depth,
                    rows,
                    agg,
                    hist,
                    split,
                });
            }
        }
    }
    RegressionTree::from_nodes(nodes, features)
}
