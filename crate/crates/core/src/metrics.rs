//! Shared vocabulary: entities, actions, metrics, budgets and weights.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque identifier of an entity (an account in the simulator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into the action library. Index 0 is always "no action".
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl ActionId {
    pub const NONE: ActionId = ActionId(0);

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub id: ActionId,
    pub name: String,
}

/// Validates an action library: ids are `0..n` in order and id 0 exists.
pub fn validate_actions(actions: &[ActionSpec]) -> Result<()> {
    if actions.is_empty() {
        return Err(Error::Empty("action library"));
    }
    let mut names = BTreeSet::new();
    for (i, a) in actions.iter().enumerate() {
        if a.id.0 != i {
            return Err(Error::invalid(format!(
                "action `{}` has id {} but sits at position {i}",
                a.name, a.id.0
            )));
        }
        if !names.insert(a.name.as_str()) {
            return Err(Error::invalid(format!("duplicate action name `{}`", a.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Abuse,
    Cost,
}

/// Direction in which the raw logged quantity is "good".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Raw value is already smaller-is-better (request counts, dollars).
    #[default]
    SmallerIsBetter,
    /// Raw value is benign-positive (days active) and must be flipped.
    LargerIsBetter,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSpec {
    /// Also the column name under which the raw value is logged.
    pub name: String,
    pub kind: MetricKind,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub orientation: Orientation,
}

impl MetricSpec {
    pub fn abuse(name: &str, unit: &str) -> Self {
        MetricSpec {
            name: name.to_string(),
            kind: MetricKind::Abuse,
            unit: unit.to_string(),
            orientation: Orientation::SmallerIsBetter,
        }
    }

    pub fn cost(name: &str, unit: &str, orientation: Orientation) -> Self {
        MetricSpec {
            name: name.to_string(),
            kind: MetricKind::Cost,
            unit: unit.to_string(),
            orientation,
        }
    }

    pub fn is_abuse(&self) -> bool {
        self.kind == MetricKind::Abuse
    }
}

/// Abuse metrics must precede cost metrics and names must be unique.
pub fn validate_metrics(metrics: &[MetricSpec]) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::Empty("metric list"));
    }
    let mut seen_cost = false;
    let mut names = BTreeSet::new();
    for m in metrics {
        if !names.insert(m.name.as_str()) {
            return Err(Error::invalid(format!("duplicate metric `{}`", m.name)));
        }
        match m.kind {
            MetricKind::Cost => seen_cost = true,
            MetricKind::Abuse if seen_cost => {
                return Err(Error::invalid(format!(
                    "abuse metric `{}` listed after a cost metric",
                    m.name
                )))
            }
            MetricKind::Abuse => {}
        }
    }
    Ok(())
}

/// Position of the metric named `name`.
pub fn metric_index(metrics: &[MetricSpec], name: &str) -> Result<usize> {
    metrics
        .iter()
        .position(|m| m.name == name)
        .ok_or_else(|| Error::UnknownMetric(name.to_string()))
}

/// Global budget on one cost metric, in metric units per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSpec {
    pub metric: String,
    pub budget: f64,
    /// Extra multiplier on top of the sample fraction, e.g. a traffic forecast.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl BudgetSpec {
    pub fn new(metric: &str, budget: f64) -> Self {
        BudgetSpec {
            metric: metric.to_string(),
            budget,
            scale: 1.0,
        }
    }

    pub fn validate(&self, metrics: &[MetricSpec]) -> Result<()> {
        let j = metric_index(metrics, &self.metric)?;
        if metrics[j].kind != MetricKind::Cost {
            return Err(Error::invalid(format!(
                "budget on `{}`, which is not a cost metric",
                self.metric
            )));
        }
        if self.budget.is_nan() || self.budget < 0.0 {
            return Err(Error::invalid(format!("budget for `{}` must be >= 0", self.metric)));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!("budget scale for `{}` must be > 0", self.metric)));
        }
        Ok(())
    }
}

/// Multipliers `w_j` over all metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("weight vector"));
        }
        if w.iter().any(|&x| x < 0.0) {
            return Err(Error::invalid("weights must be non-negative"));
        }
        Ok(WeightVector(w))
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|w| w * c).collect())
    }

    /// Appends a weight for a newly registered metric.
    pub fn push(&mut self, w: f64) -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        self.0.push(w);
        Ok(())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HorizonConfig {
    /// Length of `[t0, t1]` in days.
    pub horizon_days: u32,
    pub retrain_every_days: u32,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig {
            horizon_days: 1,
            retrain_every_days: 1,
        }
    }
}

impl HorizonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_days < 1 || self.retrain_every_days < 1 {
            return Err(Error::invalid("horizon and retrain cadence must be >= 1 day"));
        }
        Ok(())
    }
}

/// Maps a raw logged value into smaller-is-better orientation, referenced to
/// the no-action value `baseline` (pass 0 when no reference is available).
pub fn orient_metric(raw: f64, spec: &MetricSpec, baseline: f64) -> Result<f64> {
    if !raw.is_finite() || !baseline.is_finite() {
        return Err(Error::NonFinite("metric value"));
    }
    Ok(match spec.orientation {
        Orientation::SmallerIsBetter => raw - baseline,
        Orientation::LargerIsBetter => baseline - raw,
    })
}

/// Metric values of one entity on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDayMetrics {
    pub entity: EntityId,
    pub day: u32,
    pub values: Vec<f64>,
}

/// Half-open day range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub start: u32,
    pub end: u32,
}

impl DayRange {
    pub fn new(start: u32, end: u32) -> Self {
        DayRange { start, end }
    }

    pub fn contains(&self, day: u32) -> bool {
        day >= self.start && day < self.end
    }

    pub fn len(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAggregate {
    pub entities: usize,
    pub totals: Vec<f64>,
    pub means: Vec<f64>,
}

/// Sums each metric over entities and the days of `window`; means are per
/// entity. Every entity present in `rows` counts toward the denominator, even
/// if none of its rows fall in the window.
pub fn aggregate_metrics(
    rows: &[EntityDayMetrics],
    window: DayRange,
    n_metrics: usize,
) -> Result<MetricAggregate> {
    let entities: BTreeSet<EntityId> = rows.iter().map(|r| r.entity).collect();
    if entities.is_empty() {
        return Err(Error::Empty("entity set"));
    }
    let mut totals = vec![0.0; n_metrics];
    for r in rows.iter().filter(|r| window.contains(r.day)) {
        if r.values.len() != n_metrics {
            return Err(Error::Dimension(format!(
                "row for entity {} has {} metrics, expected {n_metrics}",
                r.entity,
                r.values.len()
            )));
        }
        for (t, v) in totals.iter_mut().zip(&r.values) {
            *t += v;
        }
    }
    let n = entities.len() as f64;
    let means = totals.iter().map(|t| t / n).collect();
    Ok(MetricAggregate {
        entities: entities.len(),
        totals,
        means,
    })
}
