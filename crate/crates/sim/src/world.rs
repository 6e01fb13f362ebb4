//! The simulated population and its day-by-day dynamics.
//!
//! Every draw comes from a substream keyed by (run seed, purpose, entity,
//! day): classifier scores and session counts from `FEATURES`, outcomes
//! from `OUTCOME`. The outcome stream is consumed in a fixed order whatever
//! the action, so replaying a day under no-action gives the exact
//! counterfactual.

use pro_core::features::ActionEvent;
use pro_core::policy::{DecisionRequest, RuleSignals};
use pro_core::rng::{keyed_unit, purpose, substream};
use pro_core::{EntityId, RawFeatures, Result};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::archetype::{draw_profile, Profile};
use crate::effects::ActionEffect;
use crate::events::EventKind;
use crate::scenario::SimScenario;

/// Raw feature columns, in the order of [`FeatureRow`].
pub const FEATURE_COLUMNS: [&str; 11] = [
    "bias",
    "auto_max",
    "auto_mean",
    "abuse_score",
    "account_age",
    // attempted yesterday, times the per-request weight
    "requests_yday",
    "active_yday",
    "sessions",
    "days_since_recovery",
    "client",
    "feedback_14d",
];

/// Feature values in [`FEATURE_COLUMNS`] order; NaN marks a missing value.
pub type FeatureRow = [f64; 11];

pub const N_METRICS: usize = 4;
pub type MetricRow = [f64; N_METRICS];

const FEEDBACK_DAYS: usize = 14;
const HISTORY_DAYS: u32 = 30;
const RECOVERY_CAP: f64 = 365.0;

/// Key for the arm split, kept apart from the profile stream.
const ARM_SPLIT: u64 = 0x4152_4d53;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InForce {
    pub action: usize,
    pub until: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EntityState {
    /// Attempted (not effected) scraping requests yesterday.
    pub attempted_yday: u32,
    pub active_yday: bool,
    feedback_ring: [u8; FEEDBACK_DAYS],
    /// `(day, action)` of recent non-trivial actions.
    pub history: Vec<(u32, u8)>,
    pub in_force: Option<InForce>,
    pub recovery_day: Option<i64>,
}

/// What the classifiers see on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayView {
    pub scores: [f64; 2],
    pub abuse_score: f64,
    pub sessions: u32,
}

impl DayView {
    pub fn max_score(&self) -> f64 {
        self.scores[0].max(self.scores[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub attempted: u32,
    pub complied: bool,
    pub values: MetricRow,
}

#[derive(Debug, Clone)]
pub struct World {
    pub seed: u64,
    pub gate: f64,
    pub score_noise: f64,
    pub archetype_names: Vec<String>,
    pub actions: Vec<String>,
    activity: Vec<f64>,
    feedback: Vec<f64>,
    poisson: Vec<bool>,
    /// `effects[arm][archetype][action]`.
    pub effects: Vec<Vec<Vec<ActionEffect>>>,
    pub profiles: Vec<Profile>,
    pub states: Vec<EntityState>,
    recovery_action: Option<usize>,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

impl World {
    pub fn new(scenario: &SimScenario) -> Result<World> {
        scenario.validate()?;
        let names = scenario.archetype_names();
        let table = scenario.effects.resolve(&names, &scenario.actions)?;
        let n = 2 * scenario.entities_per_arm;
        let profiles: Vec<Profile> = (0..n as u64)
            .map(|e| {
                let arm = usize::from(keyed_unit(scenario.seed, &[ARM_SPLIT, e]) >= 0.5);
                draw_profile(&scenario.archetypes, scenario.seed, e, arm)
            })
            .collect();
        let states = profiles
            .iter()
            .map(|p| EntityState {
                recovery_day: p.recovery_day,
                ..EntityState::default()
            })
            .collect();
        Ok(World {
            seed: scenario.seed,
            gate: scenario.gate,
            score_noise: scenario.score_noise,
            activity: scenario.archetypes.iter().map(|a| a.activity).collect(),
            feedback: scenario.archetypes.iter().map(|a| a.feedback).collect(),
            poisson: scenario.archetypes.iter().map(|a| a.poisson).collect(),
            archetype_names: names,
            actions: scenario.actions.clone(),
            effects: vec![table.clone(), table],
            profiles,
            states,
            recovery_action: scenario.actions.iter().position(|a| a == "compromise_recovery"),
        })
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let test = self.profiles.iter().filter(|p| p.arm == 1).count();
        [self.len() - test, test]
    }

    pub fn action_index(&self, name: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| pro_core::Error::invalid(format!("unknown action `{name}`")))
    }

    pub fn archetype_index(&self, name: &str) -> Result<usize> {
        self.archetype_names
            .iter()
            .position(|a| a == name)
            .ok_or_else(|| pro_core::Error::invalid(format!("unknown archetype `{name}`")))
    }

    pub fn view(&self, entity: usize, day: u32) -> DayView {
        let p = &self.profiles[entity];
        let mut rng = substream(self.seed, &[purpose::FEATURES, entity as u64, day as u64]);
        let noise = Normal::new(0.0, self.score_noise.max(f64::MIN_POSITIVE)).expect("validated noise");
        let s1 = clamp01(p.automation + noise.sample(&mut rng));
        let s2 = clamp01(p.automation + noise.sample(&mut rng));
        let abuse_score = clamp01(p.abuse + noise.sample(&mut rng));
        let sessions = if p.sessions > 0.0 {
            Poisson::new(p.sessions).expect("validated sessions").sample(&mut rng) as u32
        } else {
            0
        };
        DayView {
            scores: [s1, s2],
            abuse_score,
            sessions: sessions.max(1),
        }
    }

    /// Action carried over from an earlier decision, if still in force.
    pub fn carried_action(&self, entity: usize, day: u32) -> Option<usize> {
        self.states[entity].in_force.filter(|f| f.until >= day).map(|f| f.action)
    }

    /// Up for a decision: gate reached and no earlier action still in force.
    pub fn eligible(&self, entity: usize, day: u32, view: &DayView) -> bool {
        view.max_score() >= self.gate && self.carried_action(entity, day).is_none()
    }

    pub fn feature_row(&self, entity: usize, day: u32, view: &DayView) -> FeatureRow {
        let p = &self.profiles[entity];
        let s = &self.states[entity];
        let dsr = s
            .recovery_day
            .map(|r| ((day as i64 - r) as f64).min(RECOVERY_CAP))
            .unwrap_or(f64::NAN);
        let ring_sum: u32 = s.feedback_ring.iter().map(|&v| v as u32).sum();
        let feedback_14d = ring_sum - s.feedback_ring[day as usize % FEEDBACK_DAYS] as u32;
        [
            1.0,
            view.max_score(),
            (view.scores[0] + view.scores[1]) / 2.0,
            view.abuse_score,
            (p.age0 + day) as f64,
            (s.attempted_yday * p.weight) as f64,
            s.active_yday as u8 as f64,
            view.sessions as f64,
            dsr,
            p.client as f64,
            feedback_14d as f64,
        ]
    }

    pub fn history(&self, entity: usize, day: u32) -> Vec<ActionEvent> {
        self.states[entity]
            .history
            .iter()
            .filter(|(d, _)| *d < day)
            .map(|&(d, a)| ActionEvent {
                action: a as usize,
                days_ago: day - d,
            })
            .collect()
    }

    pub fn signals(&self, entity: usize, day: u32, view: &DayView) -> RuleSignals {
        let p = &self.profiles[entity];
        let s = &self.states[entity];
        RuleSignals {
            automation_scores: view.scores.to_vec(),
            abuse_score: view.abuse_score,
            days_since_recovery: s.recovery_day.map(|r| (day as i64 - r).max(0) as u32),
            account_age_days: p.age0 + day,
        }
    }

    pub fn request(&self, entity: usize, day: u32, view: &DayView) -> DecisionRequest {
        DecisionRequest {
            entity: EntityId(entity as u64),
            day,
            features: raw_features(&self.feature_row(entity, day, view), self.history(entity, day)),
            signals: self.signals(entity, day, view),
        }
    }

    /// Metrics for `entity` on `day` under `action` (0 = no action), given
    /// the effect table of its arm. Pure: does not touch the state.
    pub fn outcome(&self, entity: usize, day: u32, action: usize) -> Outcome {
        let p = &self.profiles[entity];
        let effect = &self.effects[p.arm][p.archetype][action];
        let mut rng = substream(self.seed, &[purpose::OUTCOME, entity as u64, day as u64]);
        let u_comply: f64 = rng.random();
        let attempted = if p.rate <= 0.0 {
            0
        } else if self.poisson[p.archetype] {
            Poisson::new(p.rate).expect("positive rate").sample(&mut rng) as u32
        } else {
            p.rate.round() as u32
        };
        let u_round: f64 = rng.random();
        let u_active: f64 = rng.random();
        let u_feedback: f64 = rng.random();

        let complied = u_comply < effect.compliance;
        let (m, a, fd) = if complied {
            (1.0, 1.0, 0.0)
        } else {
            (effect.abuse_multiplier, effect.activity_multiplier, effect.feedback_delta)
        };
        let effected = (attempted as f64 * m + u_round).floor();
        let active = u_active < clamp01(self.activity[p.archetype] * a);
        let feedback = u_feedback < clamp01(self.feedback[p.archetype] + fd);
        let dollars = if action == 0 { 0.0 } else { effect.dollar_cost };
        Outcome {
            attempted,
            complied,
            values: [
                effected * p.weight as f64,
                active as u8 as f64,
                feedback as u8 as f64,
                dollars,
            ],
        }
    }

    /// Replay of the day under no action with the same draws.
    pub fn counterfactual_baseline(&self, entity: usize, day: u32) -> MetricRow {
        self.outcome(entity, day, 0).values
    }

    /// Rewrites the effect tables of the arms in `scope` for the events that
    /// change how the world reacts. Other events leave the world untouched.
    pub fn apply_event(&mut self, scope: &[usize], kind: &EventKind) -> Result<()> {
        match kind {
            EventKind::InjectBug {
                action,
                activity_multiplier,
                abuse_multiplier,
                feedback_delta,
            } => {
                let k = self.action_index(action)?;
                for &i in scope {
                    for row in self.effects[i].iter_mut() {
                        row[k] = ActionEffect {
                            compliance: 0.0,
                            abuse_multiplier: *abuse_multiplier,
                            activity_multiplier: *activity_multiplier,
                            feedback_delta: *feedback_delta,
                            ..row[k]
                        };
                    }
                }
            }
            EventKind::AdversaryAdapts {
                action,
                archetype,
                abuse_multiplier,
            } => {
                let k = self.action_index(action)?;
                let a = self.archetype_index(archetype)?;
                for &i in scope {
                    self.effects[i][a][k].abuse_multiplier = *abuse_multiplier;
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Moves the entity past `day`. `decided` is the action chosen today, if
    /// the entity was up for a decision; `applied` is what actually acted.
    pub fn advance(&mut self, entity: usize, day: u32, decided: Option<usize>, applied: usize, outcome: &Outcome) {
        let p = &self.profiles[entity];
        let arm = p.arm;
        let archetype = p.archetype;
        let recovery = self.recovery_action;
        let duration = self.effects[arm][archetype][applied].duration_days;
        let s = &mut self.states[entity];
        advance_state(s, day, decided, applied, duration, recovery, outcome);
    }
}

pub(crate) fn advance_state(
    s: &mut EntityState,
    day: u32,
    decided: Option<usize>,
    applied: usize,
    duration: u32,
    recovery_action: Option<usize>,
    outcome: &Outcome,
) {
    s.attempted_yday = outcome.attempted;
    s.active_yday = outcome.values[1] > 0.0;
    s.feedback_ring[day as usize % FEEDBACK_DAYS] = (outcome.values[2] > 0.0) as u8;
    if let Some(a) = decided {
        if a != 0 {
            s.history.push((day, a as u8));
            if duration > 1 {
                s.in_force = Some(InForce {
                    action: a,
                    until: day + duration - 1,
                });
            }
        }
    }
    if s.in_force.is_some_and(|f| f.until <= day) {
        s.in_force = None;
    }
    if applied != 0 && Some(applied) == recovery_action {
        s.recovery_day = Some(day as i64);
    }
    let horizon = day.saturating_sub(HISTORY_DAYS);
    s.history.retain(|(d, _)| *d > horizon);
}

/// Builds the named feature map from a stored row.
pub fn raw_features(row: &FeatureRow, history: Vec<ActionEvent>) -> RawFeatures {
    let mut f = RawFeatures::new();
    for (name, v) in FEATURE_COLUMNS.iter().zip(row) {
        if !v.is_nan() {
            f.values.insert((*name).to_string(), *v);
        }
    }
    f.history = history;
    f
}
