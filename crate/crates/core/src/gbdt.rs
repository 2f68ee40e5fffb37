//! Least-squares gradient boosting with a constant learning rate.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binning::{BinnedDataset, FeatureBins};
use crate::config::TrainConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::{grow_tree_with, sample_features, NodeExpansion, RegressionTree, TreeNode};

pub const FORMAT_VERSION: u64 = 1;

/// `L(y, F) = (y - F)^2 / 2`.
pub fn squared_error(target: f64, prediction: f64) -> f64 {
    let r = target - prediction;
    0.5 * r * r
}

/// Negative gradient of [`squared_error`] with respect to the prediction:
/// the per-row regression target of each boosting round.
pub fn residuals(targets: &[f64], predictions: &[f64]) -> Vec<f64> {
    targets.iter().zip(predictions).map(|(y, f)| y - f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel {
    pub init_value: f64,
    pub learning_rate: f64,
    pub config: TrainConfig,
    pub feature_names: Vec<String>,
    pub bin_edges: Vec<FeatureBins>,
    pub trees: Vec<RegressionTree>,
}

/// A fitted model together with the training-set predictions tracked
/// during boosting.
#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: GbdtModel,
    pub train_predictions: Vec<f64>,
}

pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<GbdtModel> {
    Ok(fit_observed(dataset, config, |_, _| {})?.model)
}

/// Fits a model, calling `observe(round, expansion)` for every node split.
pub fn fit_observed(
    dataset: &Dataset,
    config: &TrainConfig,
    mut observe: impl FnMut(usize, &NodeExpansion<'_>),
) -> Result<FitOutput> {
    config.validate()?;
    let binned = BinnedDataset::new(dataset, config.max_bins)?;
    let targets = dataset.targets();
    let init_value = targets.iter().sum::<f64>() / targets.len() as f64;
    let mut predictions = vec![init_value; targets.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.random_seed);
    let mut trees = Vec::with_capacity(config.n_boosting_rounds);

    for round in 0..config.n_boosting_rounds {
        let gradients = residuals(targets, &predictions);
        let features = sample_features(dataset.n_features(), config.colsample_bytree, &mut rng);
        let tree = grow_tree_with(&binned, &gradients, config, features, |e| observe(round, e));
        for (i, p) in predictions.iter_mut().enumerate() {
            *p += config.learning_rate * tree.predict_at(dataset.columns(), i);
        }
        trees.push(tree);
    }

    Ok(FitOutput {
        model: GbdtModel {
            init_value,
            learning_rate: config.learning_rate,
            config: config.clone(),
            feature_names: dataset.feature_names().to_vec(),
            bin_edges: binned.feature_bins().to_vec(),
            trees,
        },
        train_predictions: predictions,
    })
}

impl GbdtModel {
    pub fn n_features(&self) -> usize {
        self.bin_edges.len()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.init_value + self.learning_rate * sum
    }

    /// Predictions for a column-major feature matrix.
    pub fn predict(&self, columns: &[Vec<f64>]) -> Result<Vec<f64>> {
        if columns.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: columns.len(),
            });
        }
        let n = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch { left: c.len(), right: n });
        }
        Ok((0..n)
            .map(|i| {
                let sum: f64 = self.trees.iter().map(|t| t.predict_at(columns, i)).sum();
                self.init_value + self.learning_rate * sum
            })
            .collect())
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        self.predict(dataset.columns())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u64,
        }
        let probe: Probe = serde_json::from_str(text)?;
        if probe.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: probe.format_version,
                supported: FORMAT_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn save_model(model: &GbdtModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<GbdtModel> {
    GbdtModel::load(path)
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u64,
    init_value: f64,
    learning_rate: f64,
    config: TrainConfig,
    feature_names: Vec<String>,
    bin_edges: Vec<Vec<f64>>,
    trees: Vec<TreeFile>,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    feature_subset: Vec<usize>,
    nodes: Vec<NodeFile>,
}

/// Flattened node; `left_child == right_child == -1` marks a leaf.
#[derive(Serialize, Deserialize)]
struct NodeFile {
    feature_index: i64,
    raw_threshold: f64,
    left_child: i64,
    right_child: i64,
    leaf_value: f64,
}

impl From<&GbdtModel> for ModelFile {
    fn from(m: &GbdtModel) -> Self {
        let trees = m
            .trees
            .iter()
            .map(|t| TreeFile {
                feature_subset: t.feature_subset().to_vec(),
                nodes: t
                    .nodes()
                    .iter()
                    .map(|n| match *n {
                        TreeNode::Leaf { value } => NodeFile {
                            feature_index: -1,
                            raw_threshold: 0.0,
                            left_child: -1,
                            right_child: -1,
                            leaf_value: value,
                        },
                        TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => NodeFile {
                            feature_index: feature as i64,
                            raw_threshold: threshold,
                            left_child: left as i64,
                            right_child: right as i64,
                            leaf_value: 0.0,
                        },
                    })
                    .collect(),
            })
            .collect();
        ModelFile {
            format_version: FORMAT_VERSION,
            init_value: m.init_value,
            learning_rate: m.learning_rate,
            config: m.config.clone(),
            feature_names: m.feature_names.clone(),
            bin_edges: m.bin_edges.iter().map(|b| b.edges().to_vec()).collect(),
            trees,
        }
    }
}

fn malformed(message: String) -> Error {
    Error::ModelParse {
        line: 0,
        column: 0,
        message,
    }
}

impl TryFrom<ModelFile> for GbdtModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let n_features = file.bin_edges.len();
        if file.feature_names.len() != n_features {
            return Err(malformed("feature_names and bin_edges differ in length".into()));
        }
        let bin_edges = file
            .bin_edges
            .into_iter()
            .map(FeatureBins::from_edges)
            .collect::<Result<Vec<_>>>()?;
        let mut trees = Vec::with_capacity(file.trees.len());
        for (t, tree) in file.trees.into_iter().enumerate() {
            let n_nodes = tree.nodes.len();
            if n_nodes == 0 {
                return Err(malformed(format!("tree {t} has no nodes")));
            }
            let mut nodes = Vec::with_capacity(n_nodes);
            for (i, n) in tree.nodes.into_iter().enumerate() {
                let bad = |what: &str| malformed(format!("tree {t}, node {i}: {what}"));
                if n.left_child == -1 && n.right_child == -1 {
                    if !n.leaf_value.is_finite() {
                        return Err(bad("non-finite leaf value"));
                    }
                    nodes.push(TreeNode::Leaf { value: n.leaf_value });
                    continue;
                }
                let in_range = |c: i64| c > i as i64 && (c as usize) < n_nodes;
                if !in_range(n.left_child) || !in_range(n.right_child) || n.left_child == n.right_child {
                    return Err(bad("child index out of range"));
                }
                if n.feature_index < 0 || n.feature_index as usize >= n_features {
                    return Err(bad("feature index out of range"));
                }
                if !n.raw_threshold.is_finite() {
                    return Err(bad("non-finite threshold"));
                }
                nodes.push(TreeNode::Split {
                    feature: n.feature_index as usize,
                    threshold: n.raw_threshold,
                    left: n.left_child as usize,
                    right: n.right_child as usize,
                });
            }
            trees.push(RegressionTree::from_nodes(nodes, tree.feature_subset));
        }
        Ok(GbdtModel {
            init_value: file.init_value,
            learning_rate: file.learning_rate,
            config: file.config,
            feature_names: file.feature_names,
            bin_edges,
            trees,
        })
    }
}
