//! The four-row, two-era example on which the pooled criterion picks a split
//! that reduces impurity in neither era.

use std::fmt::Write as _;

use serde::Serialize;

use crate::binning::bin_dataset;
use crate::config::{Alpha, SplitType, TrainConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::tree::{build_histogram, find_best_split};

/// Per-row gradients used by the example.
pub const DEMO_GRADIENTS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

pub fn demo_dataset() -> Dataset {
    Dataset::new(
        vec!["feature1".into(), "feature2".into()],
        vec![vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 3.0, 2.0, 4.0]],
        vec![-1.0, -2.0, -3.0, -4.0],
        vec![0, 0, 1, 1],
    )
    .expect("static table is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionChoice {
    pub split_type: SplitType,
    pub feature_index: usize,
    pub feature_name: String,
    /// Rows with `value <= threshold` go left.
    pub threshold: f64,
    pub score: f64,
    pub pooled_gain: f64,
    /// `None` marks an era with an empty child.
    pub per_era_gains: Vec<Option<f64>>,
    pub per_era_directions: Vec<Option<i8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoCheck {
    pub name: &'static str,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoReport {
    pub choices: Vec<CriterionChoice>,
    pub checks: Vec<DemoCheck>,
    pub passed: bool,
}

impl DemoReport {
    pub fn choice(&self, split_type: SplitType) -> Option<&CriterionChoice> {
        self.choices.iter().find(|c| c.split_type == split_type)
    }

    pub fn to_text(&self) -> String {
        let ds = demo_dataset();
        let mut out = String::new();
        out.push_str("row  feature1  feature2  era  gradient\n");
        for i in 0..ds.n_rows() {
            let _ = writeln!(
                out,
                "{:>3}  {:>8}  {:>8}  {:>3}  {:>8}",
                i,
                ds.column(0)[i],
                ds.column(1)[i],
                ds.eras()[i],
                DEMO_GRADIENTS[i]
            );
        }
        for c in &self.choices {
            let gains: Vec<String> = c
                .per_era_gains
                .iter()
                .map(|g| g.map_or("undefined".to_string(), |g| g.to_string()))
                .collect();
            let dirs: Vec<String> = c
                .per_era_directions
                .iter()
                .map(|d| d.map_or("undefined".to_string(), |d| d.to_string()))
                .collect();
            let _ = writeln!(
                out,
                "\n{}: {} <= {}\n  score {}  pooled gain {}\n  era gains [{}]\n  era directions [{}]",
                c.split_type,
                c.feature_name,
                c.threshold,
                c.score,
                c.pooled_gain,
                gains.join(", "),
                dirs.join(", ")
            );
        }
        out.push('\n');
        for check in &self.checks {
            let _ = writeln!(out, "[{}] {}", if check.passed { "ok" } else { "FAIL" }, check.name);
        }
        out
    }
}

/// Runs all three criteria at the root of the example and checks their
/// choices.
pub fn degenerate_demo() -> Result<DemoReport> {
    let ds = demo_dataset();
    let binned = bin_dataset(&ds, 255)?;
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let hist = build_histogram(&binned, &DEMO_GRADIENTS, &rows, &[0, 1]);
    let root = crate::criteria::GradAggregate::from_grads(DEMO_GRADIENTS);

    let mut choices = Vec::new();
    for split_type in SplitType::ALL {
        let config = TrainConfig {
            split_type,
            boltzmann_alpha: Alpha::Finite(0.0),
            l2_regularization: 0.0,
            min_child_samples: 1,
            ..TrainConfig::default()
        };
        if let Some(split) = find_best_split(&hist, &root, &config) {
            let f = split.feature_index;
            choices.push(CriterionChoice {
                split_type,
                feature_index: f,
                feature_name: ds.feature_names()[f].clone(),
                threshold: binned.feature_bins()[f].threshold(split.bin_threshold),
                score: split.score,
                pooled_gain: split.pooled_gain,
                per_era_gains: split.per_era_gains,
                per_era_directions: split.per_era_directions,
            });
        }
    }

    let find = |st| choices.iter().find(|c: &&CriterionChoice| c.split_type == st);
    let original = find(SplitType::Original);
    let era = find(SplitType::EraSplit);
    let directional = find(SplitType::DirectionalEraSplit);
    let checks = vec![
        DemoCheck {
            name: "original picks feature1 between 2 and 3",
            passed: original.is_some_and(|c| c.feature_index == 0 && c.threshold > 2.0 && c.threshold < 3.0),
        },
        DemoCheck {
            name: "original score is exactly 2",
            passed: original.is_some_and(|c| c.score == 2.0),
        },
        DemoCheck {
            name: "original split is undefined in both eras",
            passed: original.is_some_and(|c| c.per_era_gains == [None, None]),
        },
        DemoCheck {
            name: "era split picks feature2 with score 0.25",
            passed: era.is_some_and(|c| c.feature_index == 1 && c.score == 0.25),
        },
        DemoCheck {
            name: "era split gains are 0.25 in both eras",
            passed: era.is_some_and(|c| c.per_era_gains == [Some(0.25), Some(0.25)]),
        },
        DemoCheck {
            name: "directional split picks feature2 with agreeing directions",
            passed: directional
                .is_some_and(|c| c.feature_index == 1 && c.score == 1.0 && c.per_era_directions == [Some(-1), Some(-1)]),
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(DemoReport { choices, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_passes() {
        let report = degenerate_demo().unwrap();
        assert!(report.passed, "{}", report.to_text());
        assert_eq!(report.choices.len(), 3);
        let o = report.choice(SplitType::Original).unwrap();
        assert_eq!(o.threshold, 2.5);
        assert_eq!(o.pooled_gain, 2.0);
        assert_eq!(report.choice(SplitType::EraSplit).unwrap().pooled_gain, 0.5);
    }

    #[test]
    fn text_and_json_mention_every_criterion() {
        let report = degenerate_demo().unwrap();
        let text = report.to_text();
        for st in SplitType::ALL {
            assert!(text.contains(&st.to_string()));
        }
        assert!(text.contains("undefined"));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["choices"][2]["per_era_directions"], serde_json::json!([-1, -1]));
        assert_eq!(json["passed"], serde_json::json!(true));
    }
}
