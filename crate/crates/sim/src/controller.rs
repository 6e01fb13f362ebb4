//! Per-arm state of the learned policy: its observation store, the current
//! model bundle and weights, and the daily retrain and retune.

use std::collections::{BTreeMap, BTreeSet};

use pro_core::config::RunConfig;
use pro_core::features::ActionEvent;
use pro_core::metrics::{metric_index, BudgetSpec, MetricKind};
use pro_core::mpc::{draw_sample, tune_weights, TuningReport};
use pro_core::policy::{BaselineRule, Decision, DecisionMode, DecisionRequest, PolicyContext};
use pro_core::reward::{normalized_mse, train_bundle};
use pro_core::rng::{keyed_unit, purpose};
use pro_core::training::{build_datasets, decay_sample, reservoir, Dated, ObservationRecord, Source, OBSERVATION_SCHEMA_VERSION};
use pro_core::{ActionId, EntityId, Error, ModelBundle, Result, WeightVector};
use serde::{Deserialize, Serialize};

use crate::scenario::{world_metric_index, world_metric_specs, WORLD_METRICS};
use crate::world::{raw_features, FeatureRow, MetricRow};

/// One decision with its (eventually complete) horizon outcome, kept in a
/// compact form until it is sampled for training.
#[derive(Debug, Clone)]
pub struct StoredObservation {
    pub entity: u64,
    pub day: u32,
    pub horizon: u32,
    pub action: u8,
    pub source: Source,
    pub features: FeatureRow,
    pub history: Vec<ActionEvent>,
    pub metrics: MetricRow,
}

impl Dated for StoredObservation {
    fn day(&self) -> u32 {
        self.day
    }
}

impl StoredObservation {
    pub fn to_record(&self) -> ObservationRecord {
        ObservationRecord {
            schema_version: OBSERVATION_SCHEMA_VERSION,
            entity: EntityId(self.entity),
            day: self.day,
            features: raw_features(&self.features, self.history.clone()),
            action: ActionId(self.action as usize),
            horizon_days: self.horizon,
            metrics: WORLD_METRICS
                .iter()
                .zip(self.metrics)
                .map(|(m, v)| (m.to_string(), v))
                .collect::<BTreeMap<_, _>>(),
            source: self.source,
        }
    }
}

/// Audit entry for one retrain day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrainRecord {
    pub day: u32,
    pub metrics: Vec<String>,
    pub weights: Vec<f64>,
    /// Rows per action in the training sample.
    pub rows: Vec<usize>,
    pub warm_actions: Vec<String>,
    /// `None` when no retune ran that day.
    pub any_feasible: Option<bool>,
    /// Normalized MSE of the outgoing bundle on the previous day's
    /// outcomes, per metric of that bundle.
    pub nmse: Vec<(String, Option<f64>)>,
}

#[derive(Debug, Clone)]
pub struct ProState {
    pub config: RunConfig,
    seed: u64,
    warmup_days: u32,
    warmup_explore: f64,
    explore: f64,
    rule: BaselineRule,
    pub allowed: Vec<ActionId>,
    pub exploring: BTreeSet<ActionId>,
    pub weights: WeightVector,
    pub bundle: Option<ModelBundle>,
    store: Vec<StoredObservation>,
    /// Store indices whose horizon is still open, with their last day.
    open: Vec<(usize, u32)>,
    last_requests: Vec<DecisionRequest>,
    dirty: bool,
    pub retrains: Vec<RetrainRecord>,
    pub tuning: Vec<TuningReport>,
}

impl ProState {
    pub fn new(config: RunConfig, seed: u64, warmup_days: u32, warmup_explore: f64, explore: f64) -> Result<Self> {
        config.validate()?;
        let mut allowed = config.allowed()?;
        allowed.push(ActionId::NONE);
        allowed.sort();
        allowed.dedup();
        Ok(ProState {
            rule: config.baseline_rule()?,
            allowed,
            weights: config.initial_weights()?,
            config,
            seed,
            warmup_days,
            warmup_explore,
            explore,
            exploring: BTreeSet::new(),
            bundle: None,
            store: Vec::new(),
            open: Vec::new(),
            last_requests: Vec::new(),
            dirty: false,
            retrains: Vec::new(),
            tuning: Vec::new(),
        })
    }

    pub fn rule(&self) -> &BaselineRule {
        &self.rule
    }

    pub fn stored(&self) -> &[StoredObservation] {
        &self.store
    }

    pub fn launch(&mut self, action: ActionId) {
        if !self.allowed.contains(&action) {
            self.allowed.push(action);
            self.allowed.sort();
        }
        self.exploring.insert(action);
    }

    pub fn add_cost_metric(&mut self, name: &str, budget: Option<f64>, weight: f64) -> Result<()> {
        if metric_index(&self.config.metrics, name).is_ok() {
            return Err(Error::invalid(format!("metric `{name}` is already tracked")));
        }
        let spec = world_metric_specs()
            .into_iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMetric(name.to_string()))?;
        if spec.kind != MetricKind::Cost {
            return Err(Error::invalid(format!("`{name}` is not a cost metric")));
        }
        let mut cfg = self.config.clone();
        cfg.metrics.push(spec);
        let mut w: Vec<f64> = self.weights.as_slice().to_vec();
        w.push(weight);
        cfg.weights = Some(w.clone());
        if let Some(b) = budget {
            cfg.budgets.push(BudgetSpec::new(name, b));
        }
        cfg.validate()?;
        self.config = cfg;
        self.weights = WeightVector::new(w)?;
        self.dirty = true;
        Ok(())
    }

    pub fn change_budget(&mut self, name: &str, budget: f64) -> Result<()> {
        metric_index(&self.config.metrics, name)?;
        let mut cfg = self.config.clone();
        match cfg.budgets.iter_mut().find(|b| b.metric == name) {
            Some(b) => b.budget = budget,
            None => cfg.budgets.push(BudgetSpec::new(name, budget)),
        }
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    fn in_warmup(&self, day: u32) -> bool {
        day < self.warmup_days
    }

    /// Retrains and retunes when due. Returns whether a new bundle was built.
    pub fn begin_day(&mut self, day: u32) -> Result<bool> {
        if self.in_warmup(day) {
            return Ok(false);
        }
        let cadence = self.config.horizon.retrain_every_days;
        let due = (day - self.warmup_days).is_multiple_of(cadence);
        if !(due || self.dirty || self.bundle.is_none()) {
            return Ok(false);
        }
        self.retrain(day)?;
        self.dirty = false;
        Ok(true)
    }

    fn metric_columns(&self) -> Result<Vec<usize>> {
        self.config.metrics.iter().map(|m| world_metric_index(&m.name)).collect()
    }

    fn retrain(&mut self, now: u32) -> Result<()> {
        let window = self.config.training.window();
        window.validate()?;
        let n_actions = self.config.actions.len();

        let nmse = match &self.bundle {
            Some(old) => self.evaluate(old, now)?,
            None => Vec::new(),
        };

        let labelled: Vec<&StoredObservation> =
            self.store.iter().filter(|o| o.day + o.horizon <= now).collect();
        let sampled = decay_sample(&labelled, now, window.half_life_days, self.seed)?;
        let mut by_action: Vec<Vec<&StoredObservation>> = vec![Vec::new(); n_actions];
        for o in sampled {
            by_action[o.action as usize].push(o);
        }
        let capped: Vec<Vec<&StoredObservation>> = by_action
            .iter()
            .enumerate()
            .map(|(k, rows)| reservoir(rows, window.max_rows_per_cell, self.seed, &[now as u64, k as u64]))
            .collect();
        let rows: Vec<usize> = capped.iter().map(Vec::len).collect();
        let records: Vec<ObservationRecord> = capped.iter().flatten().map(|o| o.to_record()).collect();
        let refs: Vec<&ObservationRecord> = records.iter().collect();
        let transforms = self.config.transforms();
        let grid = build_datasets(&refs, &self.config.metrics, n_actions, &transforms)?;
        drop(records);
        let bundle = train_bundle(
            self.config.metrics.clone(),
            self.config.action_specs(),
            &transforms,
            &grid,
            &self.config.reward,
            now,
        )?;

        let mut any_feasible = None;
        if self.config.mpc.enabled && !self.last_requests.is_empty() {
            let grid = self.config.grid()?;
            if !grid.tunable.is_empty() {
                let warm: Vec<ActionId> =
                    self.allowed.iter().copied().filter(|a| !bundle.action_is_cold(a.0)).collect();
                let period = self.last_requests[0].day;
                let fraction = self.config.mpc.sample_fraction;
                let sample = draw_sample(&self.last_requests, period, fraction, self.seed)?;
                let constraints = self.config.constraints(fraction)?;
                let report = tune_weights(&self.weights, &grid, &sample, &bundle, &warm, &constraints)?;
                any_feasible = Some(report.any_feasible);
                self.weights = report.weights.clone();
                self.tuning.push(report);
            }
        }

        self.retrains.push(RetrainRecord {
            day: now,
            metrics: self.config.metrics.iter().map(|m| m.name.clone()).collect(),
            weights: self.weights.as_slice().to_vec(),
            rows,
            warm_actions: bundle
                .actions
                .iter()
                .filter(|a| !bundle.action_is_cold(a.id.0))
                .map(|a| a.name.clone())
                .collect(),
            any_feasible,
            nmse,
        });
        self.bundle = Some(bundle);
        Ok(())
    }

    /// Normalized MSE of `bundle` on the outcomes that became complete today.
    fn evaluate(&self, bundle: &ModelBundle, now: u32) -> Result<Vec<(String, Option<f64>)>> {
        let fresh: Vec<&StoredObservation> = self.store.iter().filter(|o| o.day + o.horizon == now).collect();
        bundle
            .metrics
            .iter()
            .enumerate()
            .map(|(j, m)| {
                let col = world_metric_index(&m.name)?;
                let mut pred = Vec::with_capacity(fresh.len());
                let mut truth = Vec::with_capacity(fresh.len());
                for o in &fresh {
                    let raw = raw_features(&o.features, o.history.clone());
                    pred.push(bundle.predict(j, o.action as usize, &raw).mean);
                    truth.push(pro_core::metrics::orient_metric(o.metrics[col], m, 0.0)?);
                }
                let v = if truth.is_empty() || truth.iter().all(|t| *t == 0.0) {
                    None
                } else {
                    Some(normalized_mse(&pred, &truth)?)
                };
                Ok((m.name.clone(), v))
            })
            .collect()
    }

    /// Everything the per-entity decision step needs for one day.
    pub fn day_policy(&self, day: u32) -> Result<ProDay<'_>> {
        let ctx = match (&self.bundle, self.in_warmup(day)) {
            (Some(b), false) => Some(PolicyContext::new(b, &self.weights, &self.allowed, &self.exploring, &self.rule)?),
            _ => None,
        };
        Ok(ProDay {
            ctx,
            rule: &self.rule,
            allowed: &self.allowed,
            explore: if self.in_warmup(day) { self.warmup_explore } else { self.explore },
            seed: self.seed,
        })
    }

    /// Files today's decisions. `decided` holds (request, action) pairs in
    /// entity order.
    pub fn record_decisions(&mut self, day: u32, decided: Vec<(DecisionRequest, FeatureRow, ActionId)>) {
        let horizon = self.config.horizon.horizon_days;
        let source = if self.in_warmup(day) { Source::Baseline } else { Source::Pro };
        let mut requests = Vec::with_capacity(decided.len());
        for (req, row, action) in decided {
            self.open.push((self.store.len(), day + horizon - 1));
            self.store.push(StoredObservation {
                entity: req.entity.0,
                day,
                horizon,
                action: action.0 as u8,
                source,
                features: row,
                history: req.features.history.clone(),
                metrics: [0.0; 4],
            });
            requests.push(req);
        }
        self.last_requests = requests;
    }

    /// Adds the day's outcomes to every observation whose horizon covers it.
    pub fn record_outcomes(&mut self, day: u32, values: &dyn Fn(u64) -> MetricRow) {
        for &(idx, _) in &self.open {
            let o = &mut self.store[idx];
            if o.day <= day {
                let v = values(o.entity);
                for (m, x) in o.metrics.iter_mut().zip(v) {
                    *m += x;
                }
            }
        }
        self.open.retain(|&(_, last)| last > day);
    }

    pub fn metric_names(&self) -> Vec<String> {
        self.config.metrics.iter().map(|m| m.name.clone()).collect()
    }

    pub fn metric_world_columns(&self) -> Result<Vec<usize>> {
        self.metric_columns()
    }
}

/// Frozen per-day policy of a learned arm.
pub struct ProDay<'a> {
    pub ctx: Option<PolicyContext<'a>>,
    pub rule: &'a BaselineRule,
    pub allowed: &'a [ActionId],
    pub explore: f64,
    pub seed: u64,
}

impl ProDay<'_> {
    pub fn decide(&self, req: &DecisionRequest) -> Decision {
        let key = [purpose::EXPLORATION, req.entity.0, req.day as u64];
        if self.explore > 0.0 && keyed_unit(self.seed, &key) < self.explore {
            let u = keyed_unit(self.seed, &[purpose::EXPLORATION, req.entity.0, req.day as u64, 1]);
            let k = ((u * self.allowed.len() as f64) as usize).min(self.allowed.len() - 1);
            return Decision {
                day: req.day,
                entity: req.entity,
                mode: DecisionMode::Exploration,
                action: self.allowed[k],
                scores: Vec::new(),
            };
        }
        match &self.ctx {
            Some(ctx) => pro_core::policy::select_action_thompson(req, ctx, self.seed),
            None => self.rule.decision(req),
        }
    }
}
