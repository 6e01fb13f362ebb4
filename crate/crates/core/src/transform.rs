//! Feature transforms mapping raw entity state to a fixed-length vector.
//!
//! Missing values never fail: numeric columns default to 0 (after
//! standardization), categorical columns land in the reserved "other" slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawFeatures;
use crate::floatbits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformStep {
    /// `ln(1 + max(x, 0))`.
    Log1p { column: String },
    /// One slot per category; the last slot (`cardinality - 1`) is reserved
    /// for unknown, out-of-range or missing values.
    OneHot { column: String, cardinality: usize },
    /// `(x - mean) / std`, with the constants frozen by [`FeatureTransformSpec::fit`].
    /// Unfitted steps pass the value through unchanged.
    Standardize {
        column: String,
        #[serde(default, with = "floatbits::option", skip_serializing_if = "Option::is_none")]
        mean: Option<f64>,
        #[serde(default, with = "floatbits::option", skip_serializing_if = "Option::is_none")]
        std: Option<f64>,
    },
    Passthrough { column: String },
    /// Number of times `action` was taken within the last `days` days.
    HistoryWindowSum { action: usize, days: u32 },
}

impl TransformStep {
    pub fn width(&self) -> usize {
        match self {
            TransformStep::OneHot { cardinality, .. } => *cardinality,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            TransformStep::OneHot { cardinality, .. } if *cardinality == 0 => {
                Err(Error::invalid("one-hot cardinality must be >= 1"))
            }
            TransformStep::OneHot { cardinality, .. } if *cardinality > 4096 => {
                Err(Error::invalid("one-hot cardinality too large"))
            }
            TransformStep::Standardize { mean, std, .. } => {
                if mean.is_some_and(|m| !m.is_finite()) || std.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
                    Err(Error::invalid("standardization constants must be finite with std > 0"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn write(&self, raw: &RawFeatures, out: &mut [f64]) {
        match self {
            TransformStep::Log1p { column } => {
                out[0] = raw.get(column).map_or(0.0, |x| x.max(0.0).ln_1p());
            }
            TransformStep::OneHot { column, cardinality } => {
                out.fill(0.0);
                let other = cardinality - 1;
                let slot = match raw.get(column) {
                    Some(v) if v >= 0.0 && v.fract() == 0.0 && v < other as f64 => v as usize,
                    _ => other,
                };
                out[slot] = 1.0;
            }
            TransformStep::Standardize { column, mean, std } => {
                out[0] = match raw.get(column) {
                    Some(x) => (x - mean.unwrap_or(0.0)) / std.unwrap_or(1.0),
                    None => 0.0,
                };
            }
            TransformStep::Passthrough { column } => {
                out[0] = raw.get(column).unwrap_or(0.0);
            }
            TransformStep::HistoryWindowSum { action, days } => {
                out[0] = raw
                    .history
                    .iter()
                    .filter(|e| e.action == *action && e.days_ago >= 1 && e.days_ago <= *days)
                    .count() as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTransformSpec {
    pub steps: Vec<TransformStep>,
}

impl FeatureTransformSpec {
    pub fn new(steps: Vec<TransformStep>) -> Result<Self> {
        let spec = FeatureTransformSpec { steps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Empty("transform steps"));
        }
        self.steps.iter().try_for_each(TransformStep::validate)
    }

    /// Output dimension `D`.
    pub fn output_dim(&self) -> usize {
        self.steps.iter().map(TransformStep::width).sum()
    }

    pub fn apply(&self, raw: &RawFeatures) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(raw, &mut out);
        out
    }

    /// Writes the transformed vector into `out`, which must have length `D`.
    pub fn apply_into(&self, raw: &RawFeatures, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.output_dim());
        let mut at = 0;
        for step in &self.steps {
            let w = step.width();
            step.write(raw, &mut out[at..at + w]);
            at += w;
        }
    }

    /// Freezes standardization constants from `rows`; other steps are copied.
    /// Columns with no observed values or zero spread get mean 0 / std 1.
    pub fn fit<'a, I>(&self, rows: I) -> FeatureTransformSpec
    where
        I: IntoIterator<Item = &'a RawFeatures> + Clone,
    {
        let steps = self
            .steps
            .iter()
            .map(|step| match step {
                TransformStep::Standardize { column, .. } => {
                    let (mut n, mut mean, mut m2) = (0.0f64, 0.0f64, 0.0f64);
                    for x in rows.clone().into_iter().filter_map(|r| r.get(column)) {
                        n += 1.0;
                        let d = x - mean;
                        mean += d / n;
                        m2 += d * (x - mean);
                    }
                    let std = if n > 0.0 { (m2 / n).sqrt() } else { 0.0 };
                    let (mean, std) = if n > 0.0 && std.is_finite() && std > 1e-12 {
                        (mean, std)
                    } else if n > 0.0 && mean.is_finite() {
                        (mean, 1.0)
                    } else {
                        (0.0, 1.0)
                    };
                    TransformStep::Standardize {
                        column: column.clone(),
                        mean: Some(mean),
                        std: Some(std),
                    }
                }
                other => other.clone(),
            })
            .collect();
        FeatureTransformSpec { steps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ActionEvent;

    fn spec(steps: Vec<TransformStep>) -> FeatureTransformSpec {
        FeatureTransformSpec::new(steps).unwrap()
    }

    #[test]
    fn one_hot_of_index_two() {
        let s = spec(vec![TransformStep::OneHot {
            column: "client".into(),
            cardinality: 4,
        }]);
        let raw = RawFeatures::new().with("client", 2.0);
        assert_eq!(s.apply(&raw), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn one_hot_unknown_goes_to_other_slot() {
        let s = spec(vec![TransformStep::OneHot {
            column: "client".into(),
            cardinality: 4,
        }]);
        for v in [3.0, 17.0, -1.0, 1.5] {
            assert_eq!(s.apply(&RawFeatures::new().with("client", v)), vec![0.0, 0.0, 0.0, 1.0]);
        }
        assert_eq!(s.apply(&RawFeatures::new()), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn log1p_of_zero_age() {
        let s = spec(vec![TransformStep::Log1p { column: "age".into() }]);
        assert_eq!(s.apply(&RawFeatures::new().with("age", 0.0)), vec![0.0]);
        assert_eq!(s.apply(&RawFeatures::new().with("age", -5.0)), vec![0.0]);
    }

    #[test]
    fn history_window_counts_by_enumeration() {
        let s = spec(vec![TransformStep::HistoryWindowSum { action: 5, days: 14 }]);
        let mut raw = RawFeatures::new();
        raw.history = vec![
            ActionEvent { action: 5, days_ago: 3 },
            ActionEvent { action: 5, days_ago: 9 },
            ActionEvent { action: 5, days_ago: 15 },
            ActionEvent { action: 2, days_ago: 1 },
        ];
        // hand-enumerated: blocked at day-3 and day-9 fall inside 14 days
        let expected = raw
            .history
            .iter()
            .filter(|e| e.action == 5 && (1..=14).contains(&e.days_ago))
            .count() as f64;
        assert_eq!(expected, 2.0);
        assert_eq!(s.apply(&raw), vec![expected]);
    }

    #[test]
    fn missing_numeric_is_zero_after_standardization() {
        let s = spec(vec![TransformStep::Standardize {
            column: "x".into(),
            mean: None,
            std: None,
        }]);
        let rows = vec![
            RawFeatures::new().with("x", 1.0),
            RawFeatures::new().with("x", 3.0),
        ];
        let fitted = s.fit(&rows);
        assert_eq!(fitted.apply(&RawFeatures::new()), vec![0.0]);
        assert_eq!(fitted.apply(&rows[0]), vec![-1.0]);
        assert_eq!(fitted.apply(&rows[1]), vec![1.0]);
        assert_eq!(fitted.apply(&RawFeatures::new().with("x", f64::NAN)), vec![0.0]);
    }

    #[test]
    fn constant_column_gets_unit_std() {
        let s = spec(vec![TransformStep::Standardize {
            column: "x".into(),
            mean: None,
            std: None,
        }]);
        let rows = vec![RawFeatures::new().with("x", 4.0); 3];
        let fitted = s.fit(&rows);
        assert_eq!(fitted.apply(&rows[0]), vec![0.0]);
        let empty: Vec<RawFeatures> = vec![];
        assert_eq!(s.fit(&empty).apply(&RawFeatures::new().with("x", 2.0)), vec![2.0]);
    }

    #[test]
    fn concatenates_steps_and_is_pure() {
        let s = spec(vec![
            TransformStep::Passthrough { column: "bias".into() },
            TransformStep::OneHot {
                column: "c".into(),
                cardinality: 3,
            },
            TransformStep::Log1p { column: "age".into() },
        ]);
        assert_eq!(s.output_dim(), 5);
        let raw = RawFeatures::new().with("bias", 1.0).with("c", 1.0).with("age", 9.0);
        let a = s.apply(&raw);
        let b = s.apply(&raw);
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(a[..4], [1.0, 0.0, 1.0, 0.0]);
        assert!((a[4] - 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(FeatureTransformSpec::new(vec![]).is_err());
        assert!(FeatureTransformSpec::new(vec![TransformStep::OneHot {
            column: "c".into(),
            cardinality: 0
        }])
        .is_err());
        assert!(FeatureTransformSpec::new(vec![TransformStep::Standardize {
            column: "c".into(),
            mean: Some(0.0),
            std: Some(0.0)
        }])
        .is_err());
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let s = spec(vec![TransformStep::Standardize {
            column: "x".into(),
            mean: Some(0.1 + 0.2),
            std: Some(std::f64::consts::PI),
        }]);
        let json = serde_json::to_string(&s).unwrap();
        let back: FeatureTransformSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
