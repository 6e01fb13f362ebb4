//! Weight retuning by grid search over a sample of recent traffic.
//!
//! Each candidate weight vector is scored by replaying the greedy-mean policy
//! on the sample and summing the predicted metrics. Abuse totals are summed
//! predictions; cost totals are measured against the no-action prediction
//! for the same entity, so a policy that never acts costs nothing.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawFeatures;
use crate::metrics::{ActionId, EntityId, MetricKind, WeightVector};
use crate::policy::{argmin, DecisionRequest};
use crate::reward::ModelBundle;
use crate::rng::{purpose, substream};

pub const DEFAULT_FACTORS: [f64; 5] = [0.5, 0.8, 1.0, 1.25, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcSample {
    pub period: u32,
    pub fraction: f64,
    /// Number of decisions the sample was drawn from.
    pub traffic: usize,
    pub entries: Vec<(EntityId, RawFeatures)>,
}

impl MpcSample {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `⌈fraction · n⌉`, forgiving float noise just above an integer.
pub fn sample_size(n: usize, fraction: f64) -> usize {
    let raw = fraction * n as f64;
    let near = raw.round();
    let size = if (raw - near).abs() <= 1e-9 * raw.max(1.0) { near } else { raw.ceil() };
    (size as usize).min(n)
}

/// Uniform sample without replacement from the decisions made on `period`.
/// Entries keep their log order.
pub fn draw_sample(decision_log: &[DecisionRequest], period: u32, fraction: f64, seed: u64) -> Result<MpcSample> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("sample fraction must be in (0, 1], got {fraction}")));
    }
    let traffic: Vec<&DecisionRequest> = decision_log.iter().filter(|r| r.day == period).collect();
    if traffic.is_empty() {
        return Err(Error::Empty("decision traffic for the sampled period"));
    }
    let n = sample_size(traffic.len(), fraction);
    let mut rng = substream(seed, &[purpose::MPC_SAMPLE, period as u64]);
    let mut picked = index::sample(&mut rng, traffic.len(), n).into_vec();
    picked.sort_unstable();
    Ok(MpcSample {
        period,
        fraction,
        traffic: traffic.len(),
        entries: picked
            .into_iter()
            .map(|i| (traffic[i].entity, traffic[i].features.clone()))
            .collect(),
    })
}

pub fn rescale_budget(budget: f64, scale: f64) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("budget scale must be finite and > 0, got {scale}")));
    }
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::invalid(format!("budget must be >= 0, got {budget}")));
    }
    Ok(scale * budget)
}

/// A rescaled budget `b` on one cost metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub metric: usize,
    pub bound: f64,
}

/// Multiplicative factors applied to the current weight of each tunable
/// metric; every other weight stays pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub tunable: Vec<usize>,
    pub factors: Vec<Vec<f64>>,
}

impl CandidateGrid {
    pub fn uniform(tunable: Vec<usize>, factors: &[f64]) -> Self {
        let factors = vec![factors.to_vec(); tunable.len()];
        CandidateGrid { tunable, factors }
    }

    pub fn validate(&self, n_metrics: usize) -> Result<()> {
        if self.tunable.len() != self.factors.len() {
            return Err(Error::Dimension("one factor list per tunable metric".into()));
        }
        for (j, fs) in self.tunable.iter().zip(&self.factors) {
            if *j >= n_metrics {
                return Err(Error::invalid(format!("tunable metric index {j} out of range")));
            }
            if fs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
                return Err(Error::invalid("grid factors must be finite and > 0"));
            }
            if !fs.contains(&1.0) {
                return Err(Error::invalid("every factor list must contain 1.0"));
            }
        }
        let mut seen = self.tunable.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.tunable.len() {
            return Err(Error::invalid("tunable metrics repeat"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.factors.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Factor tuples in odometer order, first tunable metric slowest.
    pub fn factor_tuples(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for fs in &self.factors {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    fs.iter().map(move |&f| {
                        let mut p = prefix.clone();
                        p.push(f);
                        p
                    })
                })
                .collect();
        }
        out
    }

    pub fn candidates(&self, current: &WeightVector) -> Result<Vec<Candidate>> {
        self.validate(current.len())?;
        self.factor_tuples()
            .into_iter()
            .map(|factors| {
                let mut w = current.as_slice().to_vec();
                for (&j, f) in self.tunable.iter().zip(&factors) {
                    w[j] *= f;
                }
                let distance = factors.iter().map(|f| f.ln().powi(2)).sum();
                Ok(Candidate {
                    weights: WeightVector::new(w)?,
                    factors,
                    distance,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub weights: WeightVector,
    pub factors: Vec<f64>,
    /// Squared log-space distance from the current weights.
    pub distance: f64,
}

/// Predicted means `[entity][action][metric]` for the sample.
#[derive(Debug, Clone)]
pub struct PredictionCache {
    pub allowed: Vec<ActionId>,
    n_metrics: usize,
    means: Vec<f64>,
    entities: usize,
}

impl PredictionCache {
    /// Fails on a cold cell for any allowed action.
    pub fn build(sample: &MpcSample, bundle: &ModelBundle, allowed: &[ActionId]) -> Result<Self> {
        let mut allowed = allowed.to_vec();
        allowed.push(ActionId::NONE);
        allowed.sort();
        allowed.dedup();
        for a in &allowed {
            if a.0 >= bundle.n_actions() {
                return Err(Error::UnknownAction(a.0));
            }
            for j in 0..bundle.n_metrics() {
                if bundle.is_cold(j, a.0) {
                    return Err(Error::ColdModel { metric: j, action: a.0 });
                }
            }
        }
        let n_metrics = bundle.n_metrics();
        let means: Vec<f64> = sample
            .entries
            .par_iter()
            .flat_map_iter(|(_, raw)| {
                allowed
                    .iter()
                    .flat_map(move |a| (0..n_metrics).map(move |j| bundle.predict(j, a.0, raw).mean))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(PredictionCache {
            n_metrics,
            entities: sample.len(),
            allowed,
            means,
        })
    }

    pub fn entities(&self) -> usize {
        self.entities
    }

    pub fn mean(&self, e: usize, k: usize, j: usize) -> f64 {
        self.means[(e * self.allowed.len() + k) * self.n_metrics + j]
    }

    /// Greedy-mean choice for entity `e`, as a position in `allowed`.
    pub fn greedy(&self, e: usize, weights: &WeightVector) -> usize {
        let scores: Vec<f64> = (0..self.allowed.len())
            .map(|k| (0..self.n_metrics).map(|j| weights.get(j) * self.mean(e, k, j)).sum())
            .collect();
        argmin(&scores)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateTotals {
    pub abuse: f64,
    /// Indexed by metric; zero for abuse metrics.
    pub cost: Vec<f64>,
    /// Count of greedy choices per allowed action.
    pub choices: Vec<usize>,
}

pub fn evaluate_cached(weights: &WeightVector, cache: &PredictionCache, kinds: &[MetricKind]) -> CandidateTotals {
    let mut abuse = 0.0;
    let mut cost = vec![0.0; kinds.len()];
    let mut choices = vec![0; cache.allowed.len()];
    // no-action sits first in `allowed`
    for e in 0..cache.entities() {
        let k = cache.greedy(e, weights);
        choices[k] += 1;
        for (j, kind) in kinds.iter().enumerate() {
            match kind {
                MetricKind::Abuse => abuse += cache.mean(e, k, j),
                MetricKind::Cost => cost[j] += cache.mean(e, k, j) - cache.mean(e, 0, j),
            }
        }
    }
    CandidateTotals { abuse, cost, choices }
}

/// Predicted totals for one candidate over the sample.
pub fn evaluate_candidate(
    weights: &WeightVector,
    sample: &MpcSample,
    bundle: &ModelBundle,
    allowed: &[ActionId],
) -> Result<CandidateTotals> {
    if weights.len() != bundle.n_metrics() {
        return Err(Error::Dimension("weight vector length differs from metric count".into()));
    }
    let cache = PredictionCache::build(sample, bundle, allowed)?;
    Ok(evaluate_cached(weights, &cache, &metric_kinds(bundle)))
}

fn metric_kinds(bundle: &ModelBundle) -> Vec<MetricKind> {
    bundle.metrics.iter().map(|m| m.kind).collect()
}

/// `Σ max(0, c − b)/b`; a zero bound counts the absolute excess.
pub fn relative_violation(totals: &CandidateTotals, constraints: &[Constraint]) -> f64 {
    constraints
        .iter()
        .map(|c| {
            let excess = (totals.cost[c.metric] - c.bound).max(0.0);
            if excess == 0.0 {
                0.0
            } else if c.bound > 0.0 {
                excess / c.bound
            } else {
                excess
            }
        })
        .sum()
}

pub fn is_feasible(totals: &CandidateTotals, constraints: &[Constraint]) -> bool {
    constraints.iter().all(|c| totals.cost[c.metric] <= c.bound)
}

/// The selection rule on already-evaluated candidates: minimum abuse among
/// feasible ones, else least relative violation; then nearest to the current
/// weights; then grid order.
pub fn select_candidate(candidates: &[Candidate], totals: &[CandidateTotals], constraints: &[Constraint]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidate grid"));
    }
    if candidates.len() != totals.len() {
        return Err(Error::Dimension("one totals entry per candidate".into()));
    }
    let any_feasible = totals.iter().any(|t| is_feasible(t, constraints));
    let key = |i: usize| -> (f64, f64) {
        let primary = if any_feasible { totals[i].abuse } else { relative_violation(&totals[i], constraints) };
        (primary, candidates[i].distance)
    };
    let pool: Vec<usize> = (0..candidates.len())
        .filter(|&i| !any_feasible || is_feasible(&totals[i], constraints))
        .collect();
    let mut best = pool[0];
    for &i in &pool[1..] {
        let (a, b) = (key(i), key(best));
        if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
            best = i;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub weights: WeightVector,
    pub factors: Vec<f64>,
    pub abuse_total: f64,
    pub cost_totals: Vec<f64>,
    pub feasible: bool,
    pub violation: f64,
    pub choices: Vec<usize>,
}

/// Audit trail of one retune.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub period: u32,
    pub sample_size: usize,
    pub metric_names: Vec<String>,
    pub allowed: Vec<ActionId>,
    pub constraints: Vec<Constraint>,
    pub candidates: Vec<CandidateReport>,
    pub selected: usize,
    pub any_feasible: bool,
    pub weights: WeightVector,
}

pub fn tune_weights(
    current: &WeightVector,
    grid: &CandidateGrid,
    sample: &MpcSample,
    bundle: &ModelBundle,
    allowed: &[ActionId],
    constraints: &[Constraint],
) -> Result<TuningReport> {
    if current.len() != bundle.n_metrics() {
        return Err(Error::Dimension("weight vector length differs from metric count".into()));
    }
    for c in constraints {
        if c.metric >= bundle.n_metrics() || bundle.metrics[c.metric].kind != MetricKind::Cost {
            return Err(Error::invalid(format!("constraint on metric {} which is not a cost metric", c.metric)));
        }
        if c.bound.is_nan() || c.bound < 0.0 {
            return Err(Error::invalid("budgets must be >= 0"));
        }
    }
    let candidates = grid.candidates(current)?;
    if candidates.is_empty() {
        return Err(Error::Empty("candidate grid"));
    }
    let cache = PredictionCache::build(sample, bundle, allowed)?;
    let kinds = metric_kinds(bundle);
    let totals: Vec<CandidateTotals> = candidates
        .par_iter()
        .map(|c| evaluate_cached(&c.weights, &cache, &kinds))
        .collect();
    let selected = select_candidate(&candidates, &totals, constraints)?;
    let any_feasible = totals.iter().any(|t| is_feasible(t, constraints));
    Ok(TuningReport {
        period: sample.period,
        sample_size: sample.len(),
        metric_names: bundle.metrics.iter().map(|m| m.name.clone()).collect(),
        allowed: cache.allowed.clone(),
        constraints: constraints.to_vec(),
        weights: candidates[selected].weights.clone(),
        candidates: candidates
            .into_iter()
            .zip(totals)
            .map(|(c, t)| CandidateReport {
                feasible: is_feasible(&t, constraints),
                violation: relative_violation(&t, constraints),
                weights: c.weights,
                factors: c.factors,
                abuse_total: t.abuse,
                cost_totals: t.cost,
                choices: t.choices,
            })
            .collect(),
        selected,
        any_feasible,
    })
}
