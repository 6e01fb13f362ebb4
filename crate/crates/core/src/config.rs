//! Run configuration: metric, action and budget declarations plus every
//! tunable of the training, policy and weight-control stages.
//!
//! Files are TOML or JSON, picked by extension. The schema is documented in
//! `docs/run-config.md`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    metric_index, validate_actions, validate_metrics, ActionId, ActionSpec, BudgetSpec, HorizonConfig, MetricKind,
    MetricSpec, WeightVector,
};
use crate::mpc::{rescale_budget, CandidateGrid, Constraint, DEFAULT_FACTORS};
use crate::policy::{BaselineRule, RuleConfig, RuleKind};
use crate::reward::RewardConfig;
use crate::training::TrainingWindow;
use crate::transform::FeatureTransformSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    /// `None` (JSON `null`) disables decay.
    pub half_life_days: Option<f64>,
    pub max_rows_per_cell: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        TrainingSettings {
            half_life_days: Some(7.0),
            max_rows_per_cell: 1_000_000,
        }
    }
}

impl TrainingSettings {
    pub fn window(&self) -> TrainingWindow {
        TrainingWindow {
            half_life_days: self.half_life_days.unwrap_or(f64::INFINITY),
            max_rows_per_cell: self.max_rows_per_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcSettings {
    pub enabled: bool,
    pub factors: Vec<f64>,
    pub sample_fraction: f64,
    /// Metrics whose weights the grid moves. Defaults to the budgeted cost metrics.
    pub tunable: Option<Vec<String>>,
}

impl Default for MpcSettings {
    fn default() -> Self {
        MpcSettings {
            enabled: true,
            factors: DEFAULT_FACTORS.to_vec(),
            sample_fraction: 0.1,
            tunable: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSettings {
    pub kind: RuleKind,
    pub s1: f64,
    #[serde(default = "one")]
    pub s2: f64,
    #[serde(default)]
    pub n1: u32,
    #[serde(default)]
    pub n2: u32,
    pub disable_action: String,
    #[serde(default)]
    pub recovery_action: Option<String>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Abuse metrics first, then cost metrics.
    pub metrics: Vec<MetricSpec>,
    /// Action names; position is the action id and position 0 is no-action.
    pub actions: Vec<String>,
    /// Actions the learned policy may choose. Defaults to all.
    #[serde(default)]
    pub allowed_actions: Option<Vec<String>>,
    #[serde(default)]
    pub budgets: Vec<BudgetSpec>,
    /// Initial weights; defaults to all ones.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default)]
    pub training: TrainingSettings,
    #[serde(default)]
    pub horizon: HorizonConfig,
    #[serde(default)]
    pub mpc: MpcSettings,
    pub rule: RuleSettings,
    /// Feature transform shared by every metric unless overridden below.
    pub features: FeatureTransformSpec,
    #[serde(default)]
    pub metric_features: BTreeMap<String, FeatureTransformSpec>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => Err(Error::invalid(format!("{}: expected a .toml or .json file", path.display()))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_metrics(&self.metrics)?;
        validate_actions(&self.action_specs())?;
        for b in &self.budgets {
            b.validate(&self.metrics)?;
        }
        if let Some(w) = &self.weights {
            if w.len() != self.metrics.len() {
                return Err(Error::Dimension(format!("{} weights for {} metrics", w.len(), self.metrics.len())));
            }
            WeightVector::new(w.clone())?;
        }
        if let Some(allowed) = &self.allowed_actions {
            for a in allowed {
                self.action_id(a)?;
            }
        }
        self.reward.validate()?;
        self.training.window().validate()?;
        self.horizon.validate()?;
        let f = self.mpc.sample_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::invalid("mpc.sample_fraction must be in (0, 1]"));
        }
        self.grid()?.validate(self.metrics.len())?;
        self.baseline_rule()?.config.validate()?;
        self.features.validate()?;
        for (name, t) in &self.metric_features {
            metric_index(&self.metrics, name)?;
            t.validate()?;
        }
        Ok(())
    }

    pub fn action_specs(&self) -> Vec<ActionSpec> {
        self.actions
            .iter()
            .enumerate()
            .map(|(i, n)| ActionSpec {
                id: ActionId(i),
                name: n.clone(),
            })
            .collect()
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId> {
        self.actions
            .iter()
            .position(|a| a == name)
            .map(ActionId)
            .ok_or_else(|| Error::invalid(format!("unknown action `{name}`")))
    }

    pub fn allowed(&self) -> Result<Vec<ActionId>> {
        match &self.allowed_actions {
            None => Ok((0..self.actions.len()).map(ActionId).collect()),
            Some(names) => names.iter().map(|n| self.action_id(n)).collect(),
        }
    }

    pub fn initial_weights(&self) -> Result<WeightVector> {
        match &self.weights {
            Some(w) => WeightVector::new(w.clone()),
            None => Ok(WeightVector::ones(self.metrics.len())),
        }
    }

    /// One transform per metric, in metric order.
    pub fn transforms(&self) -> Vec<FeatureTransformSpec> {
        self.metrics
            .iter()
            .map(|m| self.metric_features.get(&m.name).unwrap_or(&self.features).clone())
            .collect()
    }

    pub fn baseline_rule(&self) -> Result<BaselineRule> {
        let r = &self.rule;
        let disable_action = self.action_id(&r.disable_action)?;
        let recovery_action = match (&r.recovery_action, r.kind) {
            (Some(name), _) => self.action_id(name)?,
            (None, RuleKind::A) => ActionId::NONE,
            (None, RuleKind::B) => return Err(Error::invalid("rule B needs a recovery_action")),
        };
        Ok(BaselineRule {
            kind: r.kind,
            config: RuleConfig {
                s1: r.s1,
                s2: r.s2,
                n1: r.n1,
                n2: r.n2,
                disable_action,
                recovery_action,
            },
        })
    }

    pub fn grid(&self) -> Result<CandidateGrid> {
        let tunable: Vec<usize> = match &self.mpc.tunable {
            Some(names) => names.iter().map(|n| metric_index(&self.metrics, n)).collect::<Result<_>>()?,
            None => {
                let mut idx: Vec<usize> =
                    self.budgets.iter().map(|b| metric_index(&self.metrics, &b.metric)).collect::<Result<_>>()?;
                idx.sort_unstable();
                idx.dedup();
                idx
            }
        };
        if tunable.iter().any(|&j| self.metrics[j].kind == MetricKind::Abuse) {
            return Err(Error::invalid("abuse-metric weights are pinned and cannot be tuned"));
        }
        Ok(CandidateGrid::uniform(tunable, &self.mpc.factors))
    }

    /// Budgets rescaled to a sample: `b = fraction · scale · Budget`.
    pub fn constraints(&self, fraction: f64) -> Result<Vec<Constraint>> {
        self.budgets
            .iter()
            .map(|b| {
                Ok(Constraint {
                    metric: metric_index(&self.metrics, &b.metric)?,
                    bound: rescale_budget(b.budget, fraction * b.scale)?,
                })
            })
            .collect()
    }
}
