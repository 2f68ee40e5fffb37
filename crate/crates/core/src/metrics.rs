//! Regression, classification and era-wise correlation metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("metric"));
    }
    Ok(())
}

pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let sum: f64 = pred.iter().zip(target).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sum / pred.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    if pred.len() < 2 {
        return Err(Error::UndefinedCorrelation("fewer than two rows".into()));
    }
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(target) {
        let (dp, dt) = (p - mp, t - mt);
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Rounds each prediction half away from zero, clamps into {0, 1} and
/// compares with the binary target.
pub fn accuracy(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    if let Some(&bad) = target.iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::NonBinaryTarget(bad));
    }
    let hits = pred
        .iter()
        .zip(target)
        .filter(|(p, t)| p.round().clamp(0.0, 1.0) == **t)
        .count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EraCorrelation {
    pub per_era: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation; `None` with a single era.
    pub std: Option<f64>,
    /// `mean / std`; `None` when the deviation is zero or undefined.
    pub sharpe: Option<f64>,
}

/// Pearson correlation per era, their mean, sample deviation and ratio.
pub fn era_wise_corr(pred: &[f64], target: &[f64], eras: &[usize]) -> Result<EraCorrelation> {
    check_lengths(pred, target)?;
    if eras.len() != pred.len() {
        return Err(Error::LengthMismatch {
            left: eras.len(),
            right: pred.len(),
        });
    }
    let n_eras = eras.iter().max().map_or(0, |m| m + 1);
    let mut slices = vec![(Vec::new(), Vec::new()); n_eras];
    for ((&p, &t), &e) in pred.iter().zip(target).zip(eras) {
        slices[e].0.push(p);
        slices[e].1.push(t);
    }
    let per_era = slices
        .iter()
        .enumerate()
        .filter(|(_, (p, _))| !p.is_empty())
        .map(|(e, (p, t))| {
            pearson(p, t).map_err(|err| Error::UndefinedCorrelation(format!("era {e}: {err}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EraCorrelation::from_per_era(per_era))
}

impl EraCorrelation {
    /// Summarizes per-era correlations. `per_era` must be non-empty.
    pub fn from_per_era(per_era: Vec<f64>) -> Self {
        let m = per_era.len() as f64;
        let mean = per_era.iter().sum::<f64>() / m;
        let std = (per_era.len() > 1)
            .then(|| (per_era.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (m - 1.0)).sqrt());
        let sharpe = std.filter(|&s| s > 0.0).map(|s| mean / s);
        Self {
            per_era,
            mean,
            std,
            sharpe,
        }
    }
}

/// Every metric that can be computed for a prediction vector. Metrics that
/// are undefined for the data (constant vectors, non-binary targets) are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_rows: usize,
    pub mse: f64,
    pub pearson_corr: Option<f64>,
    pub accuracy: Option<f64>,
    pub era_corr_mean: Option<f64>,
    pub era_corr_std: Option<f64>,
    pub corr_sharpe: Option<f64>,
    pub per_era_corrs: Vec<f64>,
}

impl MetricReport {
    pub fn compute(pred: &[f64], target: &[f64], eras: &[usize]) -> Result<Self> {
        let mse = mse(pred, target)?;
        let era = era_wise_corr(pred, target, eras).ok();
        Ok(Self {
            n_rows: pred.len(),
            mse,
            pearson_corr: pearson(pred, target).ok(),
            accuracy: accuracy(pred, target).ok(),
            era_corr_mean: era.as_ref().map(|e| e.mean),
            era_corr_std: era.as_ref().and_then(|e| e.std),
            corr_sharpe: era.as_ref().and_then(|e| e.sharpe),
            per_era_corrs: era.map(|e| e.per_era).unwrap_or_default(),
        })
    }
}
