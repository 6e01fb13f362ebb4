//! Action selection: Thompson sampling over the combined reward law, the
//! greedy-mean variant used inside the MPC, and the rule-based baselines.
//!
//! Scores are oriented smaller-is-better: the combined score of action `k`
//! is `Σ_j w_j μ_jk(x)` with variance `Σ_j w_j² σ²_jk(x)`, and the chosen
//! action minimizes it (equivalently, maximizes the negated reward).

use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawFeatures;
use crate::metrics::{ActionId, EntityId, WeightVector};
use crate::reward::{ModelBundle, Prediction};
use crate::rng::{purpose, substream};

/// Inputs consumed by the rule-based baselines.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSignals {
    #[serde(default)]
    pub automation_scores: Vec<f64>,
    #[serde(default)]
    pub abuse_score: f64,
    #[serde(default)]
    pub days_since_recovery: Option<u32>,
    #[serde(default)]
    pub account_age_days: u32,
}

impl RuleSignals {
    /// Max automation score; 0 for an empty set.
    pub fn max_automation(&self) -> f64 {
        self.automation_scores
            .iter()
            .copied()
            .filter(|s| s.is_finite())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub entity: EntityId,
    pub day: u32,
    pub features: RawFeatures,
    #[serde(default)]
    pub signals: RuleSignals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionMode {
    Thompson,
    GreedyMean,
    BaselineFallback,
    /// Drawn uniformly from the allow-list by the caller.
    Exploration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionScore {
    pub action: ActionId,
    /// Thompson draw; absent for greedy decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<f64>,
    pub mean: f64,
    pub variance: f64,
    /// Per-metric predictions, in bundle metric order.
    pub metrics: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub day: u32,
    pub entity: EntityId,
    pub mode: DecisionMode,
    pub action: ActionId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<ActionScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleConfig {
    pub s1: f64,
    pub s2: f64,
    pub n1: u32,
    pub n2: u32,
    pub disable_action: ActionId,
    pub recovery_action: ActionId,
}

impl RuleConfig {
    pub fn validate(&self) -> Result<()> {
        for s in [self.s1, self.s2] {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid("rule thresholds must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Disable when any automation score reaches `s1`, otherwise no action.
pub fn baseline_rule_a(req: &DecisionRequest, cfg: &RuleConfig) -> ActionId {
    if req.signals.max_automation() >= cfg.s1 {
        cfg.disable_action
    } else {
        ActionId::NONE
    }
}

/// Automation gate at `s1`; inside it, disable when the abuse score reaches
/// `s2`, the last recovery was at most `n1` days ago or the account is at
/// most `n2` days old, else send through compromise recovery.
pub fn baseline_rule_b(req: &DecisionRequest, cfg: &RuleConfig) -> ActionId {
    let s = &req.signals;
    if s.max_automation() < cfg.s1 {
        return ActionId::NONE;
    }
    let recent_recovery = s.days_since_recovery.is_some_and(|d| d <= cfg.n1);
    if s.abuse_score >= cfg.s2 || recent_recovery || s.account_age_days <= cfg.n2 {
        cfg.disable_action
    } else {
        cfg.recovery_action
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRule {
    pub kind: RuleKind,
    pub config: RuleConfig,
}

impl BaselineRule {
    pub fn decide(&self, req: &DecisionRequest) -> ActionId {
        match self.kind {
            RuleKind::A => baseline_rule_a(req, &self.config),
            RuleKind::B => baseline_rule_b(req, &self.config),
        }
    }

    pub fn decision(&self, req: &DecisionRequest) -> Decision {
        Decision {
            day: req.day,
            entity: req.entity,
            mode: DecisionMode::BaselineFallback,
            action: self.decide(req),
            scores: Vec::new(),
        }
    }
}

/// Index of the smallest Thompson draw `mean_k + sqrt(var_k)·z_k`. One
/// standard normal is drawn per entry, in order, whatever its variance, so
/// paired runs stay aligned draw-for-draw. Ties keep the earliest index.
pub fn thompson_argmin<R: Rng + ?Sized>(means: &[f64], variances: &[f64], rng: &mut R) -> (usize, Vec<f64>) {
    debug_assert_eq!(means.len(), variances.len());
    let samples: Vec<f64> = means
        .iter()
        .zip(variances)
        .map(|(m, v)| {
            let z: f64 = rng.sample(StandardNormal);
            m + v.max(0.0).sqrt() * z
        })
        .collect();
    (argmin(&samples), samples)
}

/// Earliest index of the minimum.
pub fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Weighted combination of per-metric predictions for one action.
pub fn combine(preds: &[Prediction], weights: &WeightVector) -> (f64, f64) {
    preds.iter().zip(weights.as_slice()).fold((0.0, 0.0), |(m, v), (p, w)| {
        (m + w * p.mean, v + w * w * p.variance)
    })
}

/// Everything an action-selection call needs besides the request.
#[derive(Debug, Clone)]
pub struct PolicyContext<'a> {
    pub bundle: &'a ModelBundle,
    pub weights: &'a WeightVector,
    /// Allowed actions in ascending id order, starting with no-action.
    pub allowed: Vec<ActionId>,
    /// Actions whose cold cells are served with the prior instead of
    /// triggering the baseline fallback (newly launched actions).
    pub exploring: &'a BTreeSet<ActionId>,
    pub fallback: &'a BaselineRule,
}

impl<'a> PolicyContext<'a> {
    pub fn new(
        bundle: &'a ModelBundle,
        weights: &'a WeightVector,
        allowed: &[ActionId],
        exploring: &'a BTreeSet<ActionId>,
        fallback: &'a BaselineRule,
    ) -> Result<Self> {
        if weights.len() != bundle.n_metrics() {
            return Err(Error::Dimension(format!(
                "{} weights for {} metrics",
                weights.len(),
                bundle.n_metrics()
            )));
        }
        let mut allowed: Vec<ActionId> = allowed.to_vec();
        allowed.push(ActionId::NONE);
        allowed.sort();
        allowed.dedup();
        if let Some(a) = allowed.iter().find(|a| a.0 >= bundle.n_actions()) {
            return Err(Error::UnknownAction(a.0));
        }
        Ok(PolicyContext {
            bundle,
            weights,
            allowed,
            exploring,
            fallback,
        })
    }

    fn needs_fallback(&self) -> bool {
        self.allowed
            .iter()
            .any(|a| !self.exploring.contains(a) && self.bundle.action_is_cold(a.0))
    }

    fn score_actions(&self, raw: &RawFeatures) -> Vec<ActionScore> {
        self.allowed
            .iter()
            .map(|&a| {
                let metrics: Vec<Prediction> =
                    (0..self.bundle.n_metrics()).map(|j| self.bundle.predict(j, a.0, raw)).collect();
                let (mean, variance) = combine(&metrics, self.weights);
                ActionScore {
                    action: a,
                    sample: None,
                    mean,
                    variance,
                    metrics,
                }
            })
            .collect()
    }
}

/// Thompson-sampling decision. The draw stream is keyed by
/// `(seed, entity, day)`, so identical inputs give identical decisions.
pub fn select_action_thompson(req: &DecisionRequest, ctx: &PolicyContext<'_>, seed: u64) -> Decision {
    if ctx.needs_fallback() {
        return ctx.fallback.decision(req);
    }
    let mut scores = ctx.score_actions(&req.features);
    let means: Vec<f64> = scores.iter().map(|s| s.mean).collect();
    let vars: Vec<f64> = scores.iter().map(|s| s.variance).collect();
    let mut rng = substream(seed, &[purpose::DECISION, req.entity.0, req.day as u64]);
    let (best, samples) = thompson_argmin(&means, &vars, &mut rng);
    for (s, v) in scores.iter_mut().zip(samples) {
        s.sample = Some(v);
    }
    Decision {
        day: req.day,
        entity: req.entity,
        mode: DecisionMode::Thompson,
        action: scores[best].action,
        scores,
    }
}

/// Deterministic decision on predictive means only.
pub fn select_action_greedy(req: &DecisionRequest, ctx: &PolicyContext<'_>) -> Decision {
    if ctx.needs_fallback() {
        return ctx.fallback.decision(req);
    }
    let scores = ctx.score_actions(&req.features);
    let means: Vec<f64> = scores.iter().map(|s| s.mean).collect();
    let best = argmin(&means);
    Decision {
        day: req.day,
        entity: req.entity,
        mode: DecisionMode::GreedyMean,
        action: scores[best].action,
        scores,
    }
}

/// Shannon entropy (nats) of an empirical choice distribution.
pub fn selection_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum()
}
