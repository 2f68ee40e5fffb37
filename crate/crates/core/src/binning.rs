//! Histogram binning of feature columns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Bin edges for one feature. A value `x` lands in the smallest bin `b` with
/// `x <= edges[b]`, or in the last bin when it exceeds every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    edges: Vec<f64>,
}

impl FeatureBins {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDataset(
                "bin edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn bin(&self, x: f64) -> u32 {
        self.edges.partition_point(|&e| e < x) as u32
    }

    /// Raw-value threshold equivalent to sending bins `0..=b` left.
    pub fn threshold(&self, b: u32) -> f64 {
        self.edges[b as usize]
    }
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) * 0.5;
    if m >= hi {
        lo
    } else {
        m
    }
}

/// Computes bin edges for one column.
///
/// Columns with at most `max_bins` distinct values get one bin per value,
/// split at midpoints. Otherwise edges sit at the `max_bins - 1` interior
/// quantiles, each moved to the midpoint between the quantile value and the
/// next larger distinct value, then deduplicated.
pub fn compute_bin_edges(values: &[f64], max_bins: usize) -> Result<FeatureBins> {
    if values.is_empty() {
        return Err(Error::EmptyInput("compute_bin_edges"));
    }
    if max_bins < 2 {
        return Err(Error::InvalidConfig {
            field: "max_bins",
            reason: "must be at least 2".into(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDataset("non-finite value in feature column".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();

    let edges = if distinct.len() <= max_bins {
        distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect()
    } else {
        let n = sorted.len();
        let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
        for k in 1..max_bins {
            let idx = (k * n / max_bins).max(1);
            let lo = sorted[idx - 1];
            let next = distinct.partition_point(|&d| d <= lo);
            let Some(&hi) = distinct.get(next) else {
                continue;
            };
            let e = midpoint(lo, hi);
            if edges.last().is_none_or(|&last| e > last) {
                edges.push(e);
            }
        }
        edges
    };
    FeatureBins::from_edges(edges)
}

/// Integer-binned view of a dataset. Bins are stored column-major.
#[derive(Debug, Clone)]
pub struct BinnedDataset<'a> {
    source: &'a Dataset,
    feature_bins: Vec<FeatureBins>,
    bins: Vec<Vec<u32>>,
}

impl<'a> BinnedDataset<'a> {
    pub fn new(source: &'a Dataset, max_bins: usize) -> Result<Self> {
        let feature_bins = source
            .columns()
            .par_iter()
            .map(|col| compute_bin_edges(col, max_bins))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_bins(source, feature_bins))
    }

    /// Bins `source` with previously computed edges.
    pub fn with_bins(source: &'a Dataset, feature_bins: Vec<FeatureBins>) -> Self {
        assert_eq!(feature_bins.len(), source.n_features());
        let bins = source
            .columns()
            .par_iter()
            .zip(&feature_bins)
            .map(|(col, fb)| col.iter().map(|&x| fb.bin(x)).collect())
            .collect();
        Self {
            source,
            feature_bins,
            bins,
        }
    }

    pub fn source(&self) -> &'a Dataset {
        self.source
    }

    pub fn feature_bins(&self) -> &[FeatureBins] {
        &self.feature_bins
    }

    pub fn column(&self, f: usize) -> &[u32] {
        &self.bins[f]
    }

    pub fn n_bins(&self, f: usize) -> usize {
        self.feature_bins[f].n_bins()
    }
}

pub fn bin_dataset(dataset: &Dataset, max_bins: usize) -> Result<BinnedDataset<'_>> {
    BinnedDataset::new(dataset, max_bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn few_distinct_values_use_midpoints() {
        let fb = compute_bin_edges(&[1.0, 2.0, 3.0, 4.0], 255).unwrap();
        assert_eq!(fb.edges(), &[1.5, 2.5, 3.5]);
        assert_eq!(fb.n_bins(), 4);
    }

    #[test]
    fn constant_column_is_one_bin() {
        let fb = compute_bin_edges(&[3.0; 10], 8).unwrap();
        assert!(fb.edges().is_empty());
        assert_eq!(fb.bin(3.0), 0);
        assert_eq!(fb.bin(-100.0), 0);
    }

    #[test]
    fn quantile_bins_are_balanced() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let fb = compute_bin_edges(&values, 4).unwrap();
        assert_eq!(fb.n_bins(), 4);
        let mut counts = [0usize; 4];
        for &v in &values {
            counts[fb.bin(v) as usize] += 1;
        }
        for c in counts {
            assert!((24..=26).contains(&c), "{counts:?}");
        }
    }

    #[test]
    fn empty_input_rejected() {
        assert!(compute_bin_edges(&[], 4).is_err());
    }

    #[test]
    fn out_of_range_values_clamp() {
        let fb = compute_bin_edges(&[1.0, 2.0, 3.0], 10).unwrap();
        assert_eq!(fb.bin(-5.0), 0);
        assert_eq!(fb.bin(50.0), 2);
        assert_eq!(fb.bin(1.5), 0);
    }

    #[test]
    fn degenerate_table_bins() {
        let ds = Dataset::new(
            vec!["f1".into(), "f2".into(), "c".into()],
            vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 3.0, 2.0, 4.0], vec![7.0; 4]],
            vec![-1.0, -2.0, -3.0, -4.0],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let binned = bin_dataset(&ds, 5).unwrap();
        assert_eq!(binned.column(0), &[0, 1, 2, 3]);
        assert_eq!(binned.column(1), &[0, 2, 1, 3]);
        assert_eq!(binned.column(2), &[0, 0, 0, 0]);
    }

    proptest! {
        #[test]
        fn binning_is_monotone(values in prop::collection::vec(-1e3f64..1e3, 1..200), max_bins in 2usize..40) {
            let fb = compute_bin_edges(&values, max_bins).unwrap();
            prop_assert!(fb.n_bins() <= max_bins);
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            let bins: Vec<u32> = sorted.iter().map(|&v| fb.bin(v)).collect();
            prop_assert!(bins.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(bins.iter().all(|&b| (b as usize) < fb.n_bins()));
        }

        #[test]
        fn low_cardinality_keeps_every_partition(values in prop::collection::vec(0u8..12, 2..60)) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let fb = compute_bin_edges(&values, 16).unwrap();
            let mut distinct = values.clone();
            distinct.sort_by(f64::total_cmp);
            distinct.dedup();
            prop_assert_eq!(fb.n_bins(), distinct.len());
            // every raw threshold between distinct values maps to a bin threshold
            for (b, w) in distinct.windows(2).enumerate() {
                let t = fb.threshold(b as u32);
                prop_assert!(w[0] <= t && t < w[1]);
                for &v in &values {
                    prop_assert_eq!(v <= w[0], fb.bin(v) <= b as u32);
                }
            }
        }
    }
}
