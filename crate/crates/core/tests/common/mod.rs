#![allow(dead_code, clippy::needless_range_loop)]

pub mod oracles;

use pro_core::metrics::{ActionSpec, MetricSpec, Orientation};
use pro_core::mpc::MpcSample;
use pro_core::reward::{MetricActionModel, BUNDLE_SCHEMA_VERSION};
use pro_core::transform::{FeatureTransformSpec, TransformStep};
use pro_core::{ActionId, EntityId, ModelBundle, RawFeatures};

/// A warm bundle whose predictions are read straight from a table: entity
/// `i` carries a one-hot feature vector, so `μ_jk(x_i) = means[i][k][j]`
/// and `σ²_jk(x_i) = ε · sigma_diag`.
pub fn table_bundle(means: &[Vec<Vec<f64>>], abuse: &[bool], epsilon: f64, sigma_diag: f64) -> (ModelBundle, Vec<RawFeatures>) {
    let n = means.len();
    let n_actions = means[0].len();
    let n_metrics = abuse.len();
    let steps: Vec<TransformStep> = (0..n).map(|i| TransformStep::Passthrough { column: format!("e{i}") }).collect();
    let transform = FeatureTransformSpec::new(steps).unwrap();
    let metrics: Vec<MetricSpec> = abuse
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if a {
                MetricSpec::abuse(&format!("m{j}"), "units")
            } else {
                MetricSpec::cost(&format!("m{j}"), "units", Orientation::SmallerIsBetter)
            }
        })
        .collect();
    let actions: Vec<ActionSpec> = (0..n_actions)
        .map(|k| ActionSpec {
            id: ActionId(k),
            name: format!("a{k}"),
        })
        .collect();
    let mut cells = Vec::new();
    for j in 0..n_metrics {
        for k in 0..n_actions {
            let mut sigma = vec![0.0; n * n];
            for i in 0..n {
                sigma[i * n + i] = sigma_diag;
            }
            cells.push(MetricActionModel {
                metric: j,
                action: k,
                theta: (0..n).map(|i| means[i][k][j]).collect(),
                sigma,
                lambda: 1.0,
                epsilon,
                transform: transform.clone(),
                rows: 1000,
                cold: false,
            });
        }
    }
    let bundle = ModelBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        snapshot_day: 0,
        metrics,
        actions,
        cells,
    };
    bundle.validate().unwrap();
    let feats = (0..n).map(|i| RawFeatures::new().with(&format!("e{i}"), 1.0)).collect();
    (bundle, feats)
}

pub fn sample_of(features: &[RawFeatures]) -> MpcSample {
    MpcSample {
        period: 0,
        fraction: 1.0,
        traffic: features.len(),
        entries: features.iter().enumerate().map(|(i, f)| (EntityId(i as u64), f.clone())).collect(),
    }
}
