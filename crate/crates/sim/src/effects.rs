//! How each archetype responds to each enforcement action.

use std::collections::BTreeMap;

use pro_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Response of one archetype to one action. An entity first draws whether it
/// complies (clears the action and carries on unaffected); otherwise the
/// multipliers and the feedback delta apply for `duration_days`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionEffect {
    pub compliance: f64,
    pub abuse_multiplier: f64,
    pub activity_multiplier: f64,
    #[serde(default)]
    pub feedback_delta: f64,
    #[serde(default = "one_day")]
    pub duration_days: u32,
    /// Charged every time the action is applied, complied or not.
    #[serde(default)]
    pub dollar_cost: f64,
}

fn one_day() -> u32 {
    1
}

impl ActionEffect {
    pub const IDENTITY: ActionEffect = ActionEffect {
        compliance: 1.0,
        abuse_multiplier: 1.0,
        activity_multiplier: 1.0,
        feedback_delta: 0.0,
        duration_days: 1,
        dollar_cost: 0.0,
    };

    pub fn new(compliance: f64, abuse_multiplier: f64, activity_multiplier: f64, feedback_delta: f64) -> Self {
        ActionEffect {
            compliance,
            abuse_multiplier,
            activity_multiplier,
            feedback_delta,
            duration_days: 1,
            dollar_cost: 0.0,
        }
    }

    pub fn with_cost(mut self, dollars: f64) -> Self {
        self.dollar_cost = dollars;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.abuse_multiplier == 1.0
            && self.activity_multiplier == 1.0
            && self.feedback_delta == 0.0
            && self.dollar_cost == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.compliance,
            self.abuse_multiplier,
            self.activity_multiplier,
            self.feedback_delta,
            self.dollar_cost,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("action effect"));
        }
        if !(0.0..=1.0).contains(&self.compliance) {
            return Err(Error::invalid("compliance must be in [0, 1]"));
        }
        if self.abuse_multiplier < 0.0 || self.activity_multiplier < 0.0 || self.dollar_cost < 0.0 {
            return Err(Error::invalid("effect multipliers and costs must be >= 0"));
        }
        if !(-1.0..=1.0).contains(&self.feedback_delta) {
            return Err(Error::invalid("feedback delta must be in [-1, 1]"));
        }
        if self.duration_days == 0 {
            return Err(Error::invalid("effect duration must be >= 1 day"));
        }
        Ok(())
    }
}

/// `rows[archetype][action]`. Every archetype lists every action except
/// no-action, which is always the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EffectTable {
    pub rows: BTreeMap<String, BTreeMap<String, ActionEffect>>,
}

impl EffectTable {
    pub fn set(&mut self, archetype: &str, action: &str, effect: ActionEffect) {
        self.rows
            .entry(archetype.to_string())
            .or_default()
            .insert(action.to_string(), effect);
    }

    pub fn get(&self, archetype: &str, action: &str) -> Option<&ActionEffect> {
        self.rows.get(archetype)?.get(action)
    }

    pub fn get_mut(&mut self, archetype: &str, action: &str) -> Option<&mut ActionEffect> {
        self.rows.get_mut(archetype)?.get_mut(action)
    }

    /// Dense `[archetype][action]` lookup in the given orders.
    pub fn resolve(&self, archetypes: &[String], actions: &[String]) -> Result<Vec<Vec<ActionEffect>>> {
        for name in self.rows.keys() {
            if !archetypes.contains(name) {
                return Err(Error::invalid(format!("effect table names unknown archetype `{name}`")));
            }
        }
        archetypes
            .iter()
            .map(|arch| {
                let row = self.rows.get(arch);
                if let Some(row) = row {
                    if let Some(bad) = row.keys().find(|a| !actions.contains(a)) {
                        return Err(Error::invalid(format!("effect table names unknown action `{bad}`")));
                    }
                }
                actions
                    .iter()
                    .enumerate()
                    .map(|(k, action)| {
                        let e = row.and_then(|r| r.get(action));
                        match (k, e) {
                            (0, None) => Ok(ActionEffect::IDENTITY),
                            (0, Some(e)) if e.is_identity() => Ok(*e),
                            (0, Some(_)) => Err(Error::invalid("the no-action row must be the identity")),
                            (_, Some(e)) => e.validate().map(|_| *e),
                            (_, None) => Err(Error::invalid(format!("no effect for archetype `{arch}` under `{action}`"))),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}
