//! Per-(metric, action) Bayesian ridge reward models.
//!
//! Each cell predicts one metric's horizon value under one action:
//! `μ = φ(x)ᵀθ` and `σ² = ε · φ(x)ᵀΣφ(x)`, where `Σ = (XᵀX + λI)⁻¹` and
//! `θ = ΣXᵀY` come from that cell's own data. Cells are independent, which is
//! what keeps both training and serving linear in the number of cells.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawFeatures;
use crate::floatbits;
use crate::linalg::{self, log_grid};
use crate::metrics::{validate_actions, validate_metrics, ActionSpec, MetricSpec};
use crate::transform::FeatureTransformSpec;

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Global noise variance; scales every predictive variance and so sets
    /// the exploration rate.
    pub epsilon: f64,
    pub lambda_grid: Vec<f64>,
    /// Cells with fewer training rows are served as cold priors.
    pub cold_floor: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            epsilon: 0.05,
            lambda_grid: log_grid(1e-4, 1e4, 9),
            cold_floor: 50,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be finite and >= 0"));
        }
        linalg::median_lambda(&self.lambda_grid).map(|_| ())
    }
}

/// Predictive mean and variance of one metric under one action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricActionModel {
    pub metric: usize,
    pub action: usize,
    #[serde(with = "floatbits::vec")]
    pub theta: Vec<f64>,
    /// Row-major `D × D`.
    #[serde(with = "floatbits::vec")]
    pub sigma: Vec<f64>,
    #[serde(with = "floatbits::scalar")]
    pub lambda: f64,
    #[serde(with = "floatbits::scalar")]
    pub epsilon: f64,
    pub transform: FeatureTransformSpec,
    pub rows: usize,
    pub cold: bool,
}

impl MetricActionModel {
    /// Prior model: `θ = 0`, `Σ = I/λ`.
    pub fn cold(metric: usize, action: usize, transform: FeatureTransformSpec, lambda: f64, epsilon: f64, rows: usize) -> Self {
        let d = transform.output_dim();
        let mut sigma = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = 1.0 / lambda;
        }
        MetricActionModel {
            metric,
            action,
            theta: vec![0.0; d],
            sigma,
            lambda,
            epsilon,
            transform,
            rows,
            cold: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_row_slice(d, d, &self.sigma)
    }

    /// Prediction for an already-transformed feature vector.
    pub fn predict_phi(&self, phi: &[f64]) -> Prediction {
        let d = self.dim();
        debug_assert_eq!(phi.len(), d);
        let mean = phi.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for (i, &pi) in phi.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let row = &self.sigma[i * d..(i + 1) * d];
            let dot: f64 = row.iter().zip(phi).map(|(s, p)| s * p).sum();
            quad += pi * dot;
        }
        Prediction {
            mean,
            // Σ is positive definite; clamp only rounding noise.
            variance: (self.epsilon * quad).max(0.0),
        }
    }

    pub fn predict(&self, raw: &RawFeatures) -> Prediction {
        self.predict_phi(&self.transform.apply(raw))
    }

    fn validate(&self) -> Result<()> {
        let d = self.transform.output_dim();
        self.transform.validate()?;
        if self.theta.len() != d || self.sigma.len() != d * d {
            return Err(Error::Dimension(format!(
                "cell ({}, {}): transform width {d}, theta {}, sigma {}",
                self.metric,
                self.action,
                self.theta.len(),
                self.sigma.len()
            )));
        }
        if self.theta.iter().chain(&self.sigma).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("model parameters"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("cell lambda must be finite and > 0"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("cell epsilon must be finite and >= 0"));
        }
        for i in 0..d {
            if self.sigma[i * d + i] <= 0.0 {
                return Err(Error::invalid("sigma diagonal must be positive"));
            }
            for j in (i + 1)..d {
                let (a, b) = (self.sigma[i * d + j], self.sigma[j * d + i]);
                if (a - b).abs() > 1e-10 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid("sigma must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// One training dataset: rows already transformed by `transform`, whose
/// standardization constants were frozen on these same rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub transform: FeatureTransformSpec,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.x.nrows()
    }
}

/// The full grid of cells for a metric list and an action library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub schema_version: u32,
    pub snapshot_day: u32,
    pub metrics: Vec<MetricSpec>,
    pub actions: Vec<ActionSpec>,
    /// Metric-major: cell `(j, k)` is at `j * actions.len() + k`.
    pub cells: Vec<MetricActionModel>,
}

impl ModelBundle {
    /// All-cold bundle, e.g. before any data exists.
    pub fn cold(metrics: Vec<MetricSpec>, actions: Vec<ActionSpec>, transforms: &[FeatureTransformSpec], cfg: &RewardConfig, snapshot_day: u32) -> Result<Self> {
        let lambda = linalg::median_lambda(&cfg.lambda_grid)?;
        check_grid(&metrics, &actions, transforms)?;
        let cells = (0..metrics.len())
            .flat_map(|j| (0..actions.len()).map(move |k| (j, k)))
            .map(|(j, k)| MetricActionModel::cold(j, k, transforms[j].clone(), lambda, cfg.epsilon, 0))
            .collect();
        Ok(ModelBundle {
            schema_version: BUNDLE_SCHEMA_VERSION,
            snapshot_day,
            metrics,
            actions,
            cells,
        })
    }

    pub fn n_metrics(&self) -> usize {
        self.metrics.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn cell(&self, metric: usize, action: usize) -> &MetricActionModel {
        &self.cells[metric * self.actions.len() + action]
    }

    pub fn is_cold(&self, metric: usize, action: usize) -> bool {
        self.cell(metric, action).cold
    }

    /// True when any metric's cell for `action` is cold.
    pub fn action_is_cold(&self, action: usize) -> bool {
        (0..self.n_metrics()).any(|j| self.is_cold(j, action))
    }

    pub fn predict(&self, metric: usize, action: usize, raw: &RawFeatures) -> Prediction {
        self.cell(metric, action).predict(raw)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported bundle schema version {}", self.schema_version)));
        }
        validate_metrics(&self.metrics)?;
        validate_actions(&self.actions)?;
        let expected = self.metrics.len() * self.actions.len();
        if self.cells.len() != expected {
            return Err(Error::Dimension(format!("bundle has {} cells, expected {expected}", self.cells.len())));
        }
        for (i, cell) in self.cells.iter().enumerate() {
            let (j, k) = (i / self.actions.len(), i % self.actions.len());
            if cell.metric != j || cell.action != k {
                return Err(Error::Dimension(format!("cell at position {i} is labelled ({}, {})", cell.metric, cell.action)));
            }
            cell.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(s)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

fn check_grid(metrics: &[MetricSpec], actions: &[ActionSpec], transforms: &[FeatureTransformSpec]) -> Result<()> {
    validate_metrics(metrics)?;
    validate_actions(actions)?;
    if transforms.len() != metrics.len() {
        return Err(Error::Dimension(format!("{} transforms for {} metrics", transforms.len(), metrics.len())));
    }
    transforms.iter().try_for_each(FeatureTransformSpec::validate)
}

/// Fits one cell: GCV picks λ, then the closed form gives `θ` and `Σ`.
pub fn fit_cell(metric: usize, action: usize, data: &Dataset, cfg: &RewardConfig) -> Result<MetricActionModel> {
    let d = data.transform.output_dim();
    if data.x.ncols() != d {
        return Err(Error::Dimension(format!("dataset has {} columns, transform yields {d}", data.x.ncols())));
    }
    let n = data.rows();
    if n < cfg.cold_floor.max(1) {
        let lambda = linalg::median_lambda(&cfg.lambda_grid)?;
        return Ok(MetricActionModel::cold(metric, action, data.transform.clone(), lambda, cfg.epsilon, n));
    }
    let lambda = linalg::select_lambda_gcv(&data.x, &data.y, &cfg.lambda_grid)?.lambda;
    let fit = linalg::fit_ridge(&data.x, &data.y, lambda)?;
    let mut sigma = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            sigma.push(fit.sigma[(i, j)]);
        }
    }
    Ok(MetricActionModel {
        metric,
        action,
        theta: fit.theta.iter().copied().collect(),
        sigma,
        lambda,
        epsilon: cfg.epsilon,
        transform: data.transform.clone(),
        rows: n,
        cold: false,
    })
}

/// Trains every cell independently. `datasets[j][k]` holds the data for
/// metric `j` under action `k`; `None` cells are served cold with the
/// metric's base transform.
pub fn train_bundle(
    metrics: Vec<MetricSpec>,
    actions: Vec<ActionSpec>,
    transforms: &[FeatureTransformSpec],
    datasets: &[Vec<Option<Dataset>>],
    cfg: &RewardConfig,
    snapshot_day: u32,
) -> Result<ModelBundle> {
    cfg.validate()?;
    check_grid(&metrics, &actions, transforms)?;
    let (n_metrics, n_actions) = (metrics.len(), actions.len());
    if datasets.len() != n_metrics || datasets.iter().any(|row| row.len() != n_actions) {
        return Err(Error::Dimension("datasets must cover the metric × action grid".into()));
    }
    let lambda0 = linalg::median_lambda(&cfg.lambda_grid)?;
    let cells = (0..n_metrics * n_actions)
        .into_par_iter()
        .map(|i| {
            let (j, k) = (i / n_actions, i % n_actions);
            match &datasets[j][k] {
                Some(data) => fit_cell(j, k, data, cfg),
                None => Ok(MetricActionModel::cold(j, k, transforms[j].clone(), lambda0, cfg.epsilon, 0)),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModelBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        snapshot_day,
        metrics,
        actions,
        cells,
    })
}

/// `‖pred − truth‖² / ‖truth‖²`.
pub fn normalized_mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Dimension(format!("{} predictions for {} targets", predictions.len(), truth.len())));
    }
    if truth.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    if predictions.iter().chain(truth).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("normalized_mse input"));
    }
    let denom: f64 = truth.iter().map(|t| t * t).sum();
    if denom == 0.0 {
        return Err(Error::invalid("ground truth is all zero"));
    }
    let num: f64 = predictions.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(num / denom)
}
