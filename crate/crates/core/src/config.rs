use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitType {
    /// Pooled gain over all rows, ignoring eras.
    Original,
    /// Boltzmann aggregate of the per-era gains.
    EraSplit,
    /// Agreement of per-era split directions.
    DirectionalEraSplit,
}

impl SplitType {
    pub const ALL: [SplitType; 3] = [
        SplitType::Original,
        SplitType::EraSplit,
        SplitType::DirectionalEraSplit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitType::Original => "original",
            SplitType::EraSplit => "era",
            SplitType::DirectionalEraSplit => "directional-era",
        }
    }
}

impl fmt::Display for SplitType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "original" => Ok(SplitType::Original),
            "era" | "era-split" => Ok(SplitType::EraSplit),
            "directional-era" | "directional-era-split" | "directional" => {
                Ok(SplitType::DirectionalEraSplit)
            }
            _ => Err(Error::InvalidConfig {
                field: "split_type",
                reason: format!("unknown split type `{s}`"),
            }),
        }
    }
}

/// Temperature of the Boltzmann operator. `Min` and `Max` are the exact
/// limits for alpha going to minus and plus infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Min,
    Max,
}

impl Default for Alpha {
    fn default() -> Self {
        Alpha::Finite(0.0)
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Min => f.write_str("-inf"),
            Alpha::Max => f.write_str("inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" | "min" => Ok(Alpha::Min),
            "inf" | "+inf" | "infinity" | "+infinity" | "max" => Ok(Alpha::Max),
            t => {
                let a: f64 = t.parse().map_err(|_| Error::InvalidConfig {
                    field: "boltzmann_alpha",
                    reason: format!("cannot parse `{s}`"),
                })?;
                Ok(Alpha::Finite(a))
            }
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => s.serialize_f64(*a),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(a) => Ok(Alpha::Finite(a)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub split_type: SplitType,
    pub boltzmann_alpha: Alpha,
    pub l2_regularization: f64,
    pub learning_rate: f64,
    pub n_boosting_rounds: usize,
    pub max_leaves: usize,
    /// `None` means unlimited depth.
    pub max_depth: Option<usize>,
    pub min_child_samples: usize,
    pub max_bins: usize,
    pub colsample_bytree: f64,
    pub random_seed: u64,
    /// Directional splitting additionally requires a positive pooled gain.
    pub directional_gain_floor: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            split_type: SplitType::Original,
            boltzmann_alpha: Alpha::default(),
            l2_regularization: 0.0,
            learning_rate: 0.1,
            n_boosting_rounds: 100,
            max_leaves: 31,
            max_depth: None,
            min_child_samples: 20,
            max_bins: 255,
            colsample_bytree: 1.0,
            random_seed: 0,
            directional_gain_floor: true,
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

impl TrainConfig {
    /// The 2,000-tree community benchmark configuration for weekly
    /// stock-ranking data.
    pub fn numerai_benchmark() -> Self {
        Self {
            n_boosting_rounds: 2000,
            max_depth: Some(5),
            max_leaves: 32,
            learning_rate: 0.01,
            colsample_bytree: 0.1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Alpha::Finite(a) = self.boltzmann_alpha {
            if !a.is_finite() {
                return Err(invalid("boltzmann_alpha", "must be finite; use the min/max limits instead"));
            }
        }
        if !(self.l2_regularization >= 0.0 && self.l2_regularization.is_finite()) {
            return Err(invalid("l2_regularization", "must be a finite value >= 0"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", "must be a finite value > 0"));
        }
        if self.n_boosting_rounds == 0 {
            return Err(invalid("n_boosting_rounds", "must be positive"));
        }
        if self.max_leaves == 0 {
            return Err(invalid("max_leaves", "must be positive"));
        }
        if self.max_depth == Some(0) {
            return Err(invalid("max_depth", "must be positive or unlimited"));
        }
        if self.min_child_samples == 0 {
            return Err(invalid("min_child_samples", "must be positive"));
        }
        if self.max_bins < 2 {
            return Err(invalid("max_bins", "must be at least 2"));
        }
        if !(self.colsample_bytree > 0.0 && self.colsample_bytree <= 1.0) {
            return Err(invalid("colsample_bytree", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn with_split_type(&self, split_type: SplitType) -> Self {
        Self {
            split_type,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        TrainConfig::numerai_benchmark().validate().unwrap();
    }

    #[test]
    fn bounds_are_checked() {
        let base = TrainConfig::default();
        let bad = [
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { l2_regularization: -0.1, ..base.clone() },
            TrainConfig { max_bins: 1, ..base.clone() },
            TrainConfig { colsample_bytree: 0.0, ..base.clone() },
            TrainConfig { colsample_bytree: 1.5, ..base.clone() },
            TrainConfig { max_depth: Some(0), ..base.clone() },
            TrainConfig { boltzmann_alpha: Alpha::Finite(f64::NEG_INFINITY), ..base.clone() },
            TrainConfig { n_boosting_rounds: 0, ..base.clone() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        match (TrainConfig { learning_rate: 0.0, ..base }).validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "learning_rate"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn alpha_parses_and_serializes() {
        assert_eq!("-inf".parse::<Alpha>().unwrap(), Alpha::Min);
        assert_eq!("max".parse::<Alpha>().unwrap(), Alpha::Max);
        assert_eq!("-2".parse::<Alpha>().unwrap(), Alpha::Finite(-2.0));
        for a in [Alpha::Min, Alpha::Max, Alpha::Finite(-1.5)] {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<Alpha>(&s).unwrap(), a);
        }
    }

    #[test]
    fn split_type_names() {
        for st in SplitType::ALL {
            assert_eq!(st.as_str().parse::<SplitType>().unwrap(), st);
        }
    }
}
