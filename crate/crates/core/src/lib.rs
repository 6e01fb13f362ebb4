//! Core of the predictive response optimization engine.
//!
//! The pieces fit together as a daily loop:
//!
//! - [`training`] turns logged (features, action, horizon outcome) records into
//!   one dataset per (metric, action) cell, with recency-decayed sampling.
//! - [`reward`] fits an independent Bayesian ridge model per cell and serves
//!   predictive means and variances.
//! - [`policy`] combines the per-metric predictions with the weight vector and
//!   picks an enforcement action per entity by Thompson sampling, falling back
//!   to a rule-based baseline while models are cold.
//! - [`mpc`] retunes the weight vector by grid search so that predicted cost
//!   totals stay within their budgets.
//!
//! All metrics are oriented so that smaller is better.

pub mod config;
pub mod error;
pub mod features;
pub mod floatbits;
pub mod jsonl;
pub mod linalg;
pub mod metrics;
pub mod mpc;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod stats;
pub mod training;
pub mod transform;

pub use error::{Error, Result};
pub use features::{ActionEvent, RawFeatures};
pub use metrics::{
    ActionId, ActionSpec, BudgetSpec, EntityId, HorizonConfig, MetricKind, MetricSpec,
    Orientation, WeightVector,
};
pub use reward::{MetricActionModel, ModelBundle};
