//! From observation logs to per-(metric, action) training sets.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawFeatures;
use crate::metrics::{orient_metric, ActionId, EntityId, MetricSpec};
use crate::reward::Dataset;
use crate::rng::{purpose, substream};
use crate::transform::FeatureTransformSpec;

pub const OBSERVATION_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Baseline,
    Pro,
}

/// One decision with its outcome: features snapshotted at decision time `day`
/// and raw metric values accumulated over `[day, day + horizon_days)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub schema_version: u32,
    pub entity: EntityId,
    pub day: u32,
    pub features: RawFeatures,
    pub action: ActionId,
    pub horizon_days: u32,
    /// Raw (un-oriented) values keyed by metric name.
    pub metrics: BTreeMap<String, f64>,
    pub source: Source,
}

impl ObservationRecord {
    /// First day on which the label is complete.
    pub fn available_on(&self) -> u32 {
        self.day.saturating_add(self.horizon_days)
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        let rec: ObservationRecord = serde_json::from_str(line)?;
        if rec.schema_version != OBSERVATION_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported observation schema version {}", rec.schema_version)));
        }
        if rec.horizon_days == 0 {
            return Err(Error::Parse("horizon_days must be >= 1".into()));
        }
        Ok(rec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingWindow {
    /// Half-life of the inclusion probability, in days. `INFINITY` disables decay.
    pub half_life_days: f64,
    /// Cap on rows per action after decay sampling.
    pub max_rows_per_cell: usize,
}

impl Default for TrainingWindow {
    fn default() -> Self {
        TrainingWindow {
            half_life_days: 7.0,
            max_rows_per_cell: 1_000_000,
        }
    }
}

impl TrainingWindow {
    pub fn validate(&self) -> Result<()> {
        if self.half_life_days.is_nan() || self.half_life_days <= 0.0 {
            return Err(Error::invalid("half-life must be > 0"));
        }
        if self.max_rows_per_cell == 0 {
            return Err(Error::invalid("row cap must be >= 1"));
        }
        Ok(())
    }
}

/// Anything stamped with a decision day.
pub trait Dated {
    fn day(&self) -> u32;
}

impl Dated for ObservationRecord {
    fn day(&self) -> u32 {
        self.day
    }
}

/// Records whose horizon has fully elapsed by `now`.
pub fn labelled_by(records: &[ObservationRecord], now: u32) -> Vec<&ObservationRecord> {
    records.iter().filter(|r| r.available_on() <= now).collect()
}

/// Probability of keeping a record `age_days` old.
pub fn inclusion_probability(age_days: f64, half_life_days: f64) -> f64 {
    (-age_days.max(0.0) / half_life_days).exp2().min(1.0)
}

/// Keeps each record independently with probability `2^(−age/h)`, where the
/// age is `now − day`. Deterministic given `seed` and `now`.
pub fn decay_sample<'a, T: Dated>(records: &[&'a T], now: u32, half_life_days: f64, seed: u64) -> Result<Vec<&'a T>> {
    if half_life_days.is_nan() || half_life_days <= 0.0 {
        return Err(Error::invalid("half-life must be > 0"));
    }
    let mut rng = substream(seed, &[purpose::DECAY, now as u64]);
    Ok(records
        .iter()
        .copied()
        .filter(|r| {
            let age = now.saturating_sub(r.day()) as f64;
            let u: f64 = rng.random();
            u < inclusion_probability(age, half_life_days)
        })
        .collect())
}

/// Uniform reservoir down-sample to at most `cap` items, returned in input order.
pub fn reservoir<T: Copy>(items: &[T], cap: usize, seed: u64, key: &[u64]) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    let mut k = vec![purpose::RESERVOIR];
    k.extend_from_slice(key);
    let mut rng = substream(seed, &k);
    let mut keep: Vec<usize> = (0..cap).collect();
    for i in cap..items.len() {
        let j = rng.random_range(0..=i);
        if j < cap {
            keep[j] = i;
        }
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| items[i]).collect()
}

/// `datasets[j][k]` for metric `j` and action `k`.
pub type DatasetGrid = Vec<Vec<Option<Dataset>>>;

/// Routes every record to the cells of its action, one per metric. Rows are
/// ordered canonically by (day, entity) so the result does not depend on
/// input order; each cell freezes its own standardization constants.
pub fn build_datasets(
    records: &[&ObservationRecord],
    metrics: &[MetricSpec],
    n_actions: usize,
    transforms: &[FeatureTransformSpec],
) -> Result<DatasetGrid> {
    if transforms.len() != metrics.len() {
        return Err(Error::Dimension(format!("{} transforms for {} metrics", transforms.len(), metrics.len())));
    }
    let mut by_action: Vec<Vec<&ObservationRecord>> = vec![Vec::new(); n_actions];
    for r in records {
        let k = r.action.0;
        if k >= n_actions {
            return Err(Error::UnknownAction(k));
        }
        for m in metrics {
            match r.metrics.get(&m.name) {
                Some(v) if v.is_finite() => {}
                Some(_) => return Err(Error::NonFinite("observed metric value")),
                None => {
                    return Err(Error::invalid(format!(
                        "record for entity {} on day {} lacks metric `{}`",
                        r.entity, r.day, m.name
                    )))
                }
            }
        }
        by_action[k].push(r);
    }
    for rows in &mut by_action {
        rows.sort_by_key(|r| (r.day, r.entity));
    }

    let cells: Vec<Result<Dataset>> = (0..metrics.len() * n_actions)
        .into_par_iter()
        .map(|i| {
            let (j, k) = (i / n_actions, i % n_actions);
            let rows = &by_action[k];
            let transform = transforms[j].fit(rows.iter().map(|r| &r.features));
            dataset_for(&transform, rows, &metrics[j])
        })
        .collect();

    let mut grid: DatasetGrid = (0..metrics.len()).map(|_| Vec::with_capacity(n_actions)).collect();
    for (i, cell) in cells.into_iter().enumerate() {
        grid[i / n_actions].push(Some(cell?));
    }
    Ok(grid)
}

fn dataset_for(transform: &FeatureTransformSpec, rows: &[&ObservationRecord], metric: &MetricSpec) -> Result<Dataset> {
    let d = transform.output_dim();
    let mut data = vec![0.0; rows.len() * d];
    let mut y = Vec::with_capacity(rows.len());
    for (r, chunk) in rows.iter().zip(data.chunks_exact_mut(d.max(1))) {
        transform.apply_into(&r.features, &mut chunk[..d]);
        y.push(orient_metric(r.metrics[&metric.name], metric, 0.0)?);
    }
    Ok(Dataset {
        transform: transform.clone(),
        x: DMatrix::from_row_slice(rows.len(), d, &data),
        y: DVector::from_vec(y),
    })
}

/// Full training-set pipeline for one retrain: label cut-off, decay
/// sampling, per-action row cap, routing.
pub fn training_sets(
    records: &[ObservationRecord],
    now: u32,
    window: &TrainingWindow,
    metrics: &[MetricSpec],
    n_actions: usize,
    transforms: &[FeatureTransformSpec],
    seed: u64,
) -> Result<DatasetGrid> {
    window.validate()?;
    let labelled = labelled_by(records, now);
    let sampled = decay_sample(&labelled, now, window.half_life_days, seed)?;
    let mut by_action: Vec<Vec<&ObservationRecord>> = vec![Vec::new(); n_actions];
    for r in sampled {
        if r.action.0 >= n_actions {
            return Err(Error::UnknownAction(r.action.0));
        }
        by_action[r.action.0].push(r);
    }
    let capped: Vec<&ObservationRecord> = by_action
        .iter()
        .enumerate()
        .flat_map(|(k, rows)| reservoir(rows, window.max_rows_per_cell, seed, &[now as u64, k as u64]))
        .collect();
    build_datasets(&capped, metrics, n_actions, transforms)
}

/// Marks rule-policy records as bootstrap data for the first model build.
pub fn bootstrap_cold_start(baseline_log: Vec<ObservationRecord>) -> Vec<ObservationRecord> {
    baseline_log
        .into_iter()
        .map(|mut r| {
            r.source = Source::Baseline;
            r
        })
        .collect()
}
