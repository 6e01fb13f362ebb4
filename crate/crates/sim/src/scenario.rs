//! Scenario files: the population, the effect tables, the two experiment
//! arms and the event schedule.

use std::collections::BTreeSet;
use std::path::Path;

use pro_core::config::RunConfig;
use pro_core::metrics::{MetricSpec, Orientation};
use pro_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::archetype::Archetype;
use crate::effects::EffectTable;
use crate::events::SimEvent;

pub const WEIGHTED_SCRAPING: &str = "weighted_scraping_requests";
pub const DAYS_ACTIVE: &str = "days_active";
pub const FEEDBACK: &str = "feedback_events";
pub const SMS_DOLLARS: &str = "sms_dollars";

/// Metrics the world measures for every entity every day, in storage order.
pub const WORLD_METRICS: [&str; 4] = [WEIGHTED_SCRAPING, DAYS_ACTIVE, FEEDBACK, SMS_DOLLARS];

pub fn world_metric_specs() -> Vec<MetricSpec> {
    vec![
        MetricSpec::abuse(WEIGHTED_SCRAPING, "weighted requests"),
        MetricSpec::cost(DAYS_ACTIVE, "days", Orientation::LargerIsBetter),
        MetricSpec::cost(FEEDBACK, "reports", Orientation::SmallerIsBetter),
        MetricSpec::cost(SMS_DOLLARS, "dollars", Orientation::SmallerIsBetter),
    ]
}

pub fn world_metric_index(name: &str) -> Result<usize> {
    WORLD_METRICS
        .iter()
        .position(|m| *m == name)
        .ok_or_else(|| Error::UnknownMetric(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    /// The arm's baseline rule, every day.
    Rule,
    /// Baseline rule during warmup, then the learned policy. A small share
    /// of decisions is drawn uniformly from the allow-list: `warmup_explore`
    /// during warmup (so every action has data at the first build) and
    /// `explore` afterwards (so rarely chosen actions never go cold).
    Pro {
        #[serde(default = "warmup_explore")]
        warmup_explore: f64,
        #[serde(default = "explore")]
        explore: f64,
    },
}

fn warmup_explore() -> f64 {
    0.1
}

fn explore() -> f64 {
    0.02
}

impl PolicySpec {
    pub fn pro() -> Self {
        PolicySpec::Pro {
            warmup_explore: warmup_explore(),
            explore: explore(),
        }
    }

    pub fn is_pro(&self) -> bool {
        matches!(self, PolicySpec::Pro { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    pub name: String,
    pub policy: PolicySpec,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub days: u32,
    pub entities_per_arm: usize,
    /// An entity is up for a decision on days its highest automation score
    /// reaches the gate.
    #[serde(default = "gate")]
    pub gate: f64,
    /// Standard deviation of the daily classifier-score noise.
    #[serde(default = "score_noise")]
    pub score_noise: f64,
    pub archetypes: Vec<Archetype>,
    /// Position is the action id; position 0 must be no-action.
    pub actions: Vec<String>,
    pub effects: EffectTable,
    /// Control first, test second.
    pub arms: Vec<ArmSpec>,
    #[serde(default)]
    pub events: Vec<SimEvent>,
}

fn gate() -> f64 {
    0.6
}

fn score_noise() -> f64 {
    0.1
}

impl SimScenario {
    pub fn from_json(s: &str) -> Result<Self> {
        let sc: SimScenario = serde_json::from_str(s)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let sc: SimScenario = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_toml(&text),
            Some("json") => Self::from_json(&text),
            _ => Err(Error::invalid(format!("{}: expected a .toml or .json file", path.display()))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn archetype_names(&self) -> Vec<String> {
        self.archetypes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn arm_index(&self, name: &str) -> Result<usize> {
        self.arms
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::invalid(format!("unknown arm `{name}`")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::invalid("scenario must run for at least one day"));
        }
        if self.entities_per_arm == 0 || self.entities_per_arm > 10_000_000 {
            return Err(Error::invalid("entities_per_arm must be in 1..=10^7"));
        }
        if !(0.0..=1.0).contains(&self.gate) {
            return Err(Error::invalid("gate must be in [0, 1]"));
        }
        if !(self.score_noise.is_finite() && self.score_noise >= 0.0) {
            return Err(Error::invalid("score_noise must be finite and >= 0"));
        }
        if self.archetypes.is_empty() {
            return Err(Error::Empty("archetypes"));
        }
        let mut seen = BTreeSet::new();
        for a in &self.archetypes {
            a.validate()?;
            if !seen.insert(a.name.as_str()) {
                return Err(Error::invalid(format!("duplicate archetype `{}`", a.name)));
            }
        }
        if self.archetypes.iter().map(|a| a.share).sum::<f64>() <= 0.0 {
            return Err(Error::invalid("archetype shares sum to 0"));
        }
        if self.actions.len() > 255 {
            return Err(Error::invalid("at most 255 actions"));
        }
        if self.actions.first().map(String::as_str) != Some("none") {
            return Err(Error::invalid("action 0 must be `none`"));
        }
        let mut names = BTreeSet::new();
        if let Some(dup) = self.actions.iter().find(|a| !names.insert(a.as_str())) {
            return Err(Error::invalid(format!("duplicate action `{dup}`")));
        }
        self.effects.resolve(&self.archetype_names(), &self.actions)?;

        if self.arms.len() != 2 {
            return Err(Error::invalid("a scenario has exactly two arms: control, then test"));
        }
        if self.arms[0].name == self.arms[1].name {
            return Err(Error::invalid("arm names must differ"));
        }
        let world = world_metric_specs();
        for arm in &self.arms {
            arm.config.validate()?;
            if arm.config.actions != self.actions {
                return Err(Error::invalid(format!("arm `{}`: action list differs from the scenario's", arm.name)));
            }
            for m in &arm.config.metrics {
                let w = &world[world_metric_index(&m.name)?];
                if w.kind != m.kind || w.orientation != m.orientation {
                    return Err(Error::invalid(format!(
                        "arm `{}`: metric `{}` declared with a different kind or orientation",
                        arm.name, m.name
                    )));
                }
            }
            if arm.config.horizon.horizon_days > self.days {
                return Err(Error::invalid("horizon longer than the run"));
            }
            if let PolicySpec::Pro { warmup_explore, explore } = arm.policy {
                if !(0.0..=1.0).contains(&warmup_explore) || !(0.0..=1.0).contains(&explore) {
                    return Err(Error::invalid("exploration shares must be in [0, 1]"));
                }
            }
        }
        let archetypes = self.archetype_names();
        for e in &self.events {
            e.validate(&self.actions, &archetypes, &WORLD_METRICS)?;
            if e.day >= self.days {
                return Err(Error::invalid(format!("event on day {} falls after the run", e.day)));
            }
            if let Some(arm) = &e.arm {
                self.arm_index(arm)?;
            }
        }
        Ok(())
    }
}
