//! Scripted changes to the world or to an arm's configuration.

use serde::{Deserialize, Serialize};

use pro_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    /// Adds an action to the learned policy's allow-list. Its cold cells are
    /// served by the prior until the first retrain that sees enough data.
    LaunchAction { action: String },
    /// The action stops working: nobody can clear it and accounts end up
    /// stuck, inactive and filing reports.
    InjectBug {
        action: String,
        #[serde(default = "bug_activity")]
        activity_multiplier: f64,
        #[serde(default)]
        abuse_multiplier: f64,
        #[serde(default = "bug_feedback")]
        feedback_delta: f64,
    },
    /// An archetype learns to shrug off an action.
    AdversaryAdapts {
        action: String,
        #[serde(default = "adversary")]
        archetype: String,
        #[serde(default = "one")]
        abuse_multiplier: f64,
    },
    AddCostMetric {
        metric: String,
        /// `None` leaves the metric unbudgeted.
        #[serde(default)]
        budget: Option<f64>,
        #[serde(default = "one")]
        weight: f64,
    },
    ChangeBudget { metric: String, budget: f64 },
}

fn bug_activity() -> f64 {
    0.02
}

fn bug_feedback() -> f64 {
    0.9
}

fn adversary() -> String {
    "AdaptiveAdversary".to_string()
}

fn one() -> f64 {
    1.0
}

/// Applied at the start of `day`, before any retraining or decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub day: u32,
    /// Arm the event is scoped to; `None` applies it to the whole world.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<String>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl SimEvent {
    pub fn world(day: u32, kind: EventKind) -> Self {
        SimEvent { day, arm: None, kind }
    }

    pub fn in_arm(day: u32, arm: &str, kind: EventKind) -> Self {
        SimEvent {
            day,
            arm: Some(arm.to_string()),
            kind,
        }
    }

    pub fn applies_to(&self, arm: &str) -> bool {
        self.arm.as_deref().is_none_or(|a| a == arm)
    }

    pub fn validate(&self, actions: &[String], archetypes: &[String], metrics: &[&str]) -> Result<()> {
        let action_known = |a: &String| {
            if actions.iter().skip(1).any(|x| x == a) {
                Ok(())
            } else {
                Err(Error::invalid(format!("event on day {} names unknown action `{a}`", self.day)))
            }
        };
        let finite_nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("event on day {}: {what} must be finite and >= 0", self.day)))
            }
        };
        match &self.kind {
            EventKind::LaunchAction { action } => action_known(action),
            EventKind::InjectBug {
                action,
                activity_multiplier,
                abuse_multiplier,
                feedback_delta,
            } => {
                action_known(action)?;
                finite_nonneg(*activity_multiplier, "activity_multiplier")?;
                finite_nonneg(*abuse_multiplier, "abuse_multiplier")?;
                if !(-1.0..=1.0).contains(feedback_delta) {
                    return Err(Error::invalid("feedback_delta must be in [-1, 1]"));
                }
                Ok(())
            }
            EventKind::AdversaryAdapts {
                action,
                archetype,
                abuse_multiplier,
            } => {
                action_known(action)?;
                if !archetypes.contains(archetype) {
                    return Err(Error::invalid(format!("event names unknown archetype `{archetype}`")));
                }
                finite_nonneg(*abuse_multiplier, "abuse_multiplier")
            }
            EventKind::AddCostMetric { metric, budget, weight } => {
                if !metrics.contains(&metric.as_str()) {
                    return Err(Error::UnknownMetric(metric.clone()));
                }
                if budget.is_some_and(|b| b.is_nan() || b < 0.0) {
                    return Err(Error::invalid("budget must be >= 0"));
                }
                finite_nonneg(*weight, "weight")
            }
            EventKind::ChangeBudget { metric, budget } => {
                if !metrics.contains(&metric.as_str()) {
                    return Err(Error::UnknownMetric(metric.clone()));
                }
                if budget.is_nan() || *budget < 0.0 {
                    return Err(Error::invalid("budget must be >= 0"));
                }
                Ok(())
            }
        }
    }

    pub fn describe(&self) -> String {
        let scope = self.arm.as_deref().unwrap_or("world");
        let what = match &self.kind {
            EventKind::LaunchAction { action } => format!("launch {action}"),
            EventKind::InjectBug { action, .. } => format!("bug in {action}"),
            EventKind::AdversaryAdapts { action, archetype, .. } => format!("{archetype} adapts to {action}"),
            EventKind::AddCostMetric { metric, budget, .. } => match budget {
                Some(b) => format!("add cost metric {metric} (budget {b})"),
                None => format!("add cost metric {metric}"),
            },
            EventKind::ChangeBudget { metric, budget } => format!("budget of {metric} -> {budget}"),
        };
        format!("day {} [{scope}]: {what}", self.day)
    }
}
