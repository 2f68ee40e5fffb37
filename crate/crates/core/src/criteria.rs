//! Split scoring for the pooled, era-wise and directional criteria.
//!
//! All functions here are pure. "Undefined" era gains and rejected
//! candidates are represented with `Option::None`, never with a sentinel
//! number: an era whose rows all fall on one side of a split has no gain at
//! all, which is different from a gain of zero.

use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::config::Alpha;
use crate::error::{Error, Result};

/// Gradient and hessian sums over a set of rows. Hessians are constant 1
/// under squared error, so `sum_hess == count` holds exactly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GradAggregate {
    pub sum_grad: f64,
    pub sum_hess: f64,
    pub count: usize,
}

impl GradAggregate {
    pub fn from_grads(grads: impl IntoIterator<Item = f64>) -> Self {
        grads.into_iter().fold(Self::default(), |mut acc, g| {
            acc.push(g);
            acc
        })
    }

    #[inline]
    pub fn push(&mut self, g: f64) {
        self.sum_grad += g;
        self.sum_hess += 1.0;
        self.count += 1;
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Regularized mean of the gradients, `G / (H + lambda)`.
    pub fn value(&self, lambda: f64) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        self.sum_grad / (self.sum_hess + lambda)
    }
}

impl Add for GradAggregate {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        Self {
            sum_grad: self.sum_grad + rhs.sum_grad,
            sum_hess: self.sum_hess + rhs.sum_hess,
            count: self.count + rhs.count,
        }
    }
}

impl AddAssign for GradAggregate {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for GradAggregate {
    type Output = Self;

    /// Subtraction used for sibling histograms. An emptied aggregate is reset
    /// to exact zeros so that `count == 0` keeps implying zero sums.
    fn sub(self, rhs: Self) -> Self {
        let count = self.count - rhs.count;
        if count == 0 {
            return Self::default();
        }
        Self {
            sum_grad: self.sum_grad - rhs.sum_grad,
            sum_hess: self.sum_hess - rhs.sum_hess,
            count,
        }
    }
}

/// `G^2 / (H + lambda)` for one partition.
pub fn partition_score(agg: &GradAggregate, lambda: f64) -> Result<f64> {
    if agg.count == 0 {
        return if lambda > 0.0 {
            Ok(0.0)
        } else {
            Err(Error::UndefinedScore)
        };
    }
    Ok(agg.sum_grad * agg.sum_grad / (agg.sum_hess + lambda))
}

/// Gain of splitting `parent` into `left` and `right` under the pooled
/// criterion. Negative values are possible when `lambda > 0`.
pub fn original_gain(
    parent: &GradAggregate,
    left: &GradAggregate,
    right: &GradAggregate,
    lambda: f64,
) -> Result<f64> {
    let l = partition_score(left, lambda)?;
    let r = partition_score(right, lambda)?;
    let p = partition_score(parent, lambda)?;
    Ok(0.5 * (l + r - p))
}

/// The pooled gain restricted to one era's rows. `None` when the split
/// leaves one side of this era empty.
pub fn era_gain(
    parent: &GradAggregate,
    left: &GradAggregate,
    right: &GradAggregate,
    lambda: f64,
) -> Option<f64> {
    if left.count == 0 || right.count == 0 {
        return None;
    }
    original_gain(parent, left, right, lambda).ok()
}

/// Boltzmann-weighted mean `sum x e^(a x) / sum e^(a x)`.
///
/// Exponents are shifted by their maximum before exponentiation. `Alpha::Min`
/// and `Alpha::Max` return the exact minimum and maximum.
pub fn boltzmann(values: &[f64], alpha: Alpha) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("boltzmann"));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = match alpha {
        Alpha::Min => return Ok(lo),
        Alpha::Max => return Ok(hi),
        Alpha::Finite(a) => a,
    };
    let shift = values.iter().map(|&x| a * x).fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for &x in values {
        let w = (a * x - shift).exp();
        num += x * w;
        den += w;
    }
    Ok((num / den).clamp(lo, hi))
}

/// Era-split score: the Boltzmann aggregate of the per-era gains, or `None`
/// (reject) if the split is undefined in any era.
pub fn era_split_score(era_gains: &[Option<f64>], alpha: Alpha) -> Option<f64> {
    let gains: Option<Vec<f64>> = era_gains.iter().copied().collect();
    boltzmann(&gains?, alpha).ok()
}

/// `sign(v_l - v_r)`, with exact ties mapping to 0.
pub fn split_direction(left_value: f64, right_value: f64) -> i8 {
    let d = left_value - right_value;
    if d > 0.0 {
        1
    } else if d < 0.0 {
        -1
    } else {
        0
    }
}

/// Mean absolute agreement `|sum_j d_j| / M` of per-era directions, or `None`
/// if any era's direction is undefined.
pub fn directional_score(directions: &[Option<i8>]) -> Option<f64> {
    if directions.is_empty() {
        return None;
    }
    let mut total = 0i64;
    for d in directions {
        total += i64::from((*d)?);
    }
    Some(total.unsigned_abs() as f64 / directions.len() as f64)
}
