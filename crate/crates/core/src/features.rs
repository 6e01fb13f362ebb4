use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// An enforcement action taken on the entity `days_ago` days before the
/// decision time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub action: usize,
    pub days_ago: u32,
}

/// Raw per-entity state at decision time: named numeric columns (categorical
/// columns carry their category index) plus the prior action history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    #[serde(default)]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<ActionEvent>,
}

impl RawFeatures {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, column: &str, value: f64) -> Self {
        self.values.insert(column.to_string(), value);
        self
    }

    pub fn set(&mut self, column: &str, value: f64) {
        self.values.insert(column.to_string(), value);
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        self.values.get(column).copied().filter(|v| v.is_finite())
    }
}
