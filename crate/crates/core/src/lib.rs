//! Histogram gradient boosted trees with era-aware split criteria.
//!
//! Training rows carry an era (environment) index. Besides the usual pooled
//! gain, trees can rank splits by a smooth aggregate of per-era gains or by
//! how consistently a split orders its two leaf values across eras.

pub mod binning;
pub mod config;
pub mod criteria;
pub mod data;
pub mod demo;
pub mod error;
pub mod experiment;
pub mod gbdt;
pub mod metrics;
pub mod synth;
pub mod tree;

pub use config::{Alpha, SplitType, TrainConfig};
pub use data::{load_dataset, load_features, Dataset};
pub use error::{Error, Result};
pub use gbdt::{fit, load_model, save_model, GbdtModel};
pub use metrics::MetricReport;
