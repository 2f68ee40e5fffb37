//! Random grid search over training configurations. Every sampled
//! configuration is trained once per split type on the same data.

use std::io::Write;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Alpha, SplitType, TrainConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbdt::fit_observed;
use crate::metrics::MetricReport;

/// Candidate values per parameter. Each sampled configuration picks one
/// value from every list independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub colsample_bytree: Vec<f64>,
    pub l2_regularization: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub max_bins: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub max_leaves: Vec<usize>,
    pub min_child_samples: Vec<usize>,
    pub n_boosting_rounds: Vec<usize>,
    pub boltzmann_alpha: Vec<Alpha>,
    pub split_types: Vec<SplitType>,
    pub n_configs: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::standard()
    }
}

impl GridSpec {
    /// The general-purpose parameter ranges. A column sample of 0 is not a
    /// usable fraction and is left out.
    pub fn standard() -> Self {
        Self {
            colsample_bytree: vec![0.1, 0.3, 0.5, 0.7, 0.9, 1.0],
            l2_regularization: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
            learning_rate: vec![0.01, 0.05, 0.1, 0.5, 1.0],
            max_bins: vec![3, 4, 5, 7, 9],
            max_depth: [2, 3, 4, 5, 7, 9, 15].map(Some).to_vec(),
            max_leaves: vec![5, 7, 10, 16, 32],
            min_child_samples: vec![1, 3, 5, 10, 20],
            n_boosting_rounds: vec![5, 10, 20, 50, 100, 150],
            boltzmann_alpha: [-2.0, -1.0, 0.0, 1.0, 2.0].map(Alpha::Finite).to_vec(),
            split_types: SplitType::ALL.to_vec(),
            n_configs: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_configs == 0 {
            return Err(Error::InvalidConfig {
                field: "n_configs",
                reason: "must be positive".into(),
            });
        }
        let lists = [
            ("colsample_bytree", self.colsample_bytree.is_empty()),
            ("l2_regularization", self.l2_regularization.is_empty()),
            ("learning_rate", self.learning_rate.is_empty()),
            ("max_bins", self.max_bins.is_empty()),
            ("max_depth", self.max_depth.is_empty()),
            ("max_leaves", self.max_leaves.is_empty()),
            ("min_child_samples", self.min_child_samples.is_empty()),
            ("n_boosting_rounds", self.n_boosting_rounds.is_empty()),
            ("boltzmann_alpha", self.boltzmann_alpha.is_empty()),
            ("split_types", self.split_types.is_empty()),
        ];
        if let Some((field, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(Error::InvalidConfig {
                field,
                reason: "needs at least one candidate".into(),
            });
        }
        // every candidate must be valid on its own
        for c in &self.colsample_bytree {
            TrainConfig { colsample_bytree: *c, ..Default::default() }.validate()?;
        }
        for v in &self.l2_regularization {
            TrainConfig { l2_regularization: *v, ..Default::default() }.validate()?;
        }
        for v in &self.learning_rate {
            TrainConfig { learning_rate: *v, ..Default::default() }.validate()?;
        }
        for v in &self.max_bins {
            TrainConfig { max_bins: *v, ..Default::default() }.validate()?;
        }
        for v in &self.max_depth {
            TrainConfig { max_depth: *v, ..Default::default() }.validate()?;
        }
        for v in &self.max_leaves {
            TrainConfig { max_leaves: *v, ..Default::default() }.validate()?;
        }
        for v in &self.min_child_samples {
            TrainConfig { min_child_samples: *v, ..Default::default() }.validate()?;
        }
        for v in &self.n_boosting_rounds {
            TrainConfig { n_boosting_rounds: *v, ..Default::default() }.validate()?;
        }
        for v in &self.boltzmann_alpha {
            TrainConfig { boltzmann_alpha: *v, ..Default::default() }.validate()?;
        }
        Ok(())
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, values: &[T]) -> T {
    *values.choose(rng).expect("validated non-empty")
}

/// Draws `grid.n_configs` configurations. The split type is left at its
/// default; callers set it per run.
pub fn sample_configs(grid: &GridSpec) -> Result<Vec<TrainConfig>> {
    grid.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    Ok((0..grid.n_configs)
        .map(|_| TrainConfig {
            split_type: SplitType::Original,
            colsample_bytree: pick(&mut rng, &grid.colsample_bytree),
            l2_regularization: pick(&mut rng, &grid.l2_regularization),
            learning_rate: pick(&mut rng, &grid.learning_rate),
            max_bins: pick(&mut rng, &grid.max_bins),
            max_depth: pick(&mut rng, &grid.max_depth),
            max_leaves: pick(&mut rng, &grid.max_leaves),
            min_child_samples: pick(&mut rng, &grid.min_child_samples),
            n_boosting_rounds: pick(&mut rng, &grid.n_boosting_rounds),
            boltzmann_alpha: pick(&mut rng, &grid.boltzmann_alpha),
            random_seed: rng.random(),
            directional_gain_floor: true,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_id: usize,
    pub split_type: SplitType,
    pub config: TrainConfig,
    pub train_metrics: Option<MetricReport>,
    pub test_metrics: Option<MetricReport>,
    pub wall_time_seconds: f64,
    /// Set when the run failed; the metrics are then absent.
    pub error: Option<String>,
}

/// Trains one configuration and evaluates it on both sets.
pub fn run_one(config_id: usize, config: &TrainConfig, train: &Dataset, test: &Dataset) -> RunRecord {
    let start = Instant::now();
    let outcome = (|| -> Result<(MetricReport, MetricReport)> {
        let fitted = fit_observed(train, config, |_, _| {})?;
        let train_metrics = MetricReport::compute(&fitted.train_predictions, train.targets(), train.eras())?;
        let test_pred = fitted.model.predict_dataset(test)?;
        let test_metrics = MetricReport::compute(&test_pred, test.targets(), test.eras())?;
        Ok((train_metrics, test_metrics))
    })();
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let (train_metrics, test_metrics, error) = match outcome {
        Ok((a, b)) => (Some(a), Some(b), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    RunRecord {
        config_id,
        split_type: config.split_type,
        config: config.clone(),
        train_metrics,
        test_metrics,
        wall_time_seconds,
        error,
    }
}

/// Runs every sampled configuration under every split type of the grid.
///
/// The split types of one configuration train concurrently; `sink` sees the
/// records in (config, split type) order as soon as each configuration
/// finishes, so an interrupted search keeps its completed rows.
pub fn grid_search(
    train: &Dataset,
    test: &Dataset,
    grid: &GridSpec,
    mut sink: impl FnMut(&RunRecord) -> Result<()>,
) -> Result<Vec<RunRecord>> {
    let configs = sample_configs(grid)?;
    let mut records = Vec::with_capacity(configs.len() * grid.split_types.len());
    for (id, config) in configs.iter().enumerate() {
        let batch: Vec<RunRecord> = grid
            .split_types
            .par_iter()
            .map(|&st| run_one(id, &config.with_split_type(st), train, test))
            .collect();
        for record in batch {
            sink(&record)?;
            records.push(record);
        }
    }
    Ok(records)
}

/// Best successful run per split type under `score`, where larger is
/// better. Ties keep the earlier run.
pub fn best_by(
    records: &[RunRecord],
    split_type: SplitType,
    score: impl Fn(&RunRecord) -> Option<f64>,
) -> Option<&RunRecord> {
    let mut best: Option<(&RunRecord, f64)> = None;
    for r in records.iter().filter(|r| r.split_type == split_type) {
        if let Some(s) = score(r) {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((r, s));
            }
        }
    }
    best.map(|(r, _)| r)
}

/// One flat CSV row per run.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    config_id: usize,
    split_type: &'a str,
    boltzmann_alpha: String,
    l2_regularization: f64,
    learning_rate: f64,
    n_boosting_rounds: usize,
    max_leaves: usize,
    max_depth: Option<usize>,
    min_child_samples: usize,
    max_bins: usize,
    colsample_bytree: f64,
    random_seed: u64,
    train_mse: Option<f64>,
    train_corr: Option<f64>,
    train_accuracy: Option<f64>,
    train_era_corr_mean: Option<f64>,
    test_mse: Option<f64>,
    test_corr: Option<f64>,
    test_accuracy: Option<f64>,
    test_era_corr_mean: Option<f64>,
    test_corr_sharpe: Option<f64>,
    wall_time_seconds: f64,
    error: Option<&'a str>,
}

impl<'a> From<&'a RunRecord> for CsvRow<'a> {
    fn from(r: &'a RunRecord) -> Self {
        let c = &r.config;
        let tr = r.train_metrics.as_ref();
        let te = r.test_metrics.as_ref();
        Self {
            config_id: r.config_id,
            split_type: r.split_type.as_str(),
            boltzmann_alpha: c.boltzmann_alpha.to_string(),
            l2_regularization: c.l2_regularization,
            learning_rate: c.learning_rate,
            n_boosting_rounds: c.n_boosting_rounds,
            max_leaves: c.max_leaves,
            max_depth: c.max_depth,
            min_child_samples: c.min_child_samples,
            max_bins: c.max_bins,
            colsample_bytree: c.colsample_bytree,
            random_seed: c.random_seed,
            train_mse: tr.map(|m| m.mse),
            train_corr: tr.and_then(|m| m.pearson_corr),
            train_accuracy: tr.and_then(|m| m.accuracy),
            train_era_corr_mean: tr.and_then(|m| m.era_corr_mean),
            test_mse: te.map(|m| m.mse),
            test_corr: te.and_then(|m| m.pearson_corr),
            test_accuracy: te.and_then(|m| m.accuracy),
            test_era_corr_mean: te.and_then(|m| m.era_corr_mean),
            test_corr_sharpe: te.and_then(|m| m.corr_sharpe),
            wall_time_seconds: r.wall_time_seconds,
            error: r.error.as_deref(),
        }
    }
}

/// CSV sink for grid-search records, flushed after every row.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(writer),
        }
    }

    pub fn write(&mut self, record: &RunRecord) -> Result<()> {
        self.inner.serialize(CsvRow::from(record))?;
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_sine_wave, SineWaveSpec};

    fn tiny_grid() -> GridSpec {
        GridSpec {
            n_boosting_rounds: vec![3, 5],
            n_configs: 2,
            seed: 4,
            ..GridSpec::standard()
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let a = sample_configs(&tiny_grid()).unwrap();
        assert_eq!(a, sample_configs(&tiny_grid()).unwrap());
        assert_eq!(a.len(), 2);
        let other = sample_configs(&GridSpec { seed: 5, ..tiny_grid() }).unwrap();
        assert_ne!(a, other);
        for c in &a {
            c.validate().unwrap();
        }
    }

    #[test]
    fn invalid_grids() {
        assert!(sample_configs(&GridSpec { n_configs: 0, ..tiny_grid() }).is_err());
        assert!(sample_configs(&GridSpec { colsample_bytree: vec![0.0], ..tiny_grid() }).is_err());
        let err = sample_configs(&GridSpec { max_bins: vec![], ..tiny_grid() }).unwrap_err();
        assert!(err.to_string().contains("max_bins"));
    }

    #[test]
    fn grid_produces_one_row_per_run() {
        let data = gen_sine_wave(&SineWaveSpec { seed: 1, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        let mut writer = RecordWriter::new(&mut buf);
        let records = grid_search(&data.train, &data.test, &tiny_grid(), |r| writer.write(r)).unwrap();
        drop(writer);
        assert_eq!(records.len(), 6);
        let ids: Vec<usize> = records.iter().map(|r| r.config_id).collect();
        assert_eq!(ids, [0, 0, 0, 1, 1, 1]);
        assert!(records.iter().all(|r| r.error.is_none()));
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().nth(1).unwrap().starts_with("0,original,"));
    }

    #[test]
    fn failed_runs_are_recorded() {
        let data = gen_sine_wave(&SineWaveSpec::default()).unwrap();
        let config = TrainConfig { learning_rate: 0.0, ..Default::default() };
        let r = run_one(0, &config, &data.train, &data.test);
        assert!(r.error.as_deref().unwrap().contains("learning_rate"));
        assert!(r.train_metrics.is_none());
    }

    #[test]
    fn best_picks_highest_score() {
        let data = gen_sine_wave(&SineWaveSpec::default()).unwrap();
        let records = grid_search(&data.train, &data.test, &tiny_grid(), |_| Ok(())).unwrap();
        let best = best_by(&records, SplitType::EraSplit, |r| r.test_metrics.as_ref().map(|m| -m.mse)).unwrap();
        for r in records.iter().filter(|r| r.split_type == SplitType::EraSplit) {
            assert!(r.test_metrics.as_ref().unwrap().mse >= best.test_metrics.as_ref().unwrap().mse);
        }
    }
}
