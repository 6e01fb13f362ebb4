//! Two-arm experiments: the daily decide / observe / retrain loop over the
//! simulated world, then the end-of-run comparison.

use pro_core::metrics::{orient_metric, DayRange};
use pro_core::policy::{BaselineRule, Decision, DecisionRequest};
use pro_core::rng::derive_seed;
use pro_core::stats::{relative_delta, welch_t_test};
use pro_core::{ActionId, Error, RawFeatures, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{ProDay, ProState, RetrainRecord};
use crate::events::{EventKind, SimEvent};
use crate::output::{OutputOptions, Sink};
use crate::scenario::{world_metric_specs, PolicySpec, SimScenario, WORLD_METRICS};
use crate::world::{FeatureRow, MetricRow, Outcome, World, N_METRICS};

const ARM_SEED: u64 = 0x4152_4d5f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: SimScenario,
    #[serde(default = "fourteen")]
    pub warmup_days: u32,
    /// Metrics are compared over the last `window_days` days.
    #[serde(default = "fourteen")]
    pub window_days: u32,
    #[serde(default = "alpha")]
    pub alpha: f64,
}

fn fourteen() -> u32 {
    14
}

fn alpha() -> f64 {
    0.05
}

impl ExperimentPlan {
    pub fn new(scenario: SimScenario) -> Self {
        ExperimentPlan {
            scenario,
            warmup_days: 14,
            window_days: 14,
            alpha: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.window_days == 0 {
            return Err(Error::invalid("measurement window must be at least one day"));
        }
        if self.warmup_days + self.window_days > self.scenario.days {
            return Err(Error::invalid("warmup plus measurement window exceed the run length"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("alpha must be in (0, 1)"));
        }
        Ok(())
    }

    pub fn window(&self) -> DayRange {
        DayRange::new(self.scenario.days - self.window_days, self.scenario.days)
    }
}

/// Per-entity, per-day metric values of a run, in world metric order.
#[derive(Debug, Clone)]
pub struct DailyMetrics {
    pub days: u32,
    pub arm_of: Vec<usize>,
    values: Vec<f64>,
}

impl DailyMetrics {
    fn new(arm_of: Vec<usize>, days: u32) -> Self {
        DailyMetrics {
            values: vec![0.0; arm_of.len() * days as usize * N_METRICS],
            days,
            arm_of,
        }
    }

    fn offset(&self, entity: usize, day: u32) -> usize {
        (entity * self.days as usize + day as usize) * N_METRICS
    }

    pub fn row(&self, entity: usize, day: u32) -> &[f64] {
        let o = self.offset(entity, day);
        &self.values[o..o + N_METRICS]
    }

    fn set(&mut self, entity: usize, day: u32, row: &MetricRow) {
        let o = self.offset(entity, day);
        self.values[o..o + N_METRICS].copy_from_slice(row);
    }

    /// Per-entity sums of `metric` over `range`, for the entities of `arm`
    /// in entity order.
    pub fn entity_sums(&self, arm: usize, metric: usize, range: DayRange) -> Vec<f64> {
        let end = range.end.min(self.days);
        (0..self.arm_of.len())
            .filter(|&e| self.arm_of[e] == arm)
            .map(|e| (range.start..end).map(|d| self.row(e, d)[metric]).sum())
            .collect()
    }

    /// Arm total of every metric on one day.
    pub fn day_totals(&self, arm: usize, day: u32) -> MetricRow {
        let mut t = [0.0; N_METRICS];
        for e in (0..self.arm_of.len()).filter(|&e| self.arm_of[e] == arm) {
            for (acc, v) in t.iter_mut().zip(self.row(e, day)) {
                *acc += v;
            }
        }
        t
    }
}

/// Daily decision counts of one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCounts {
    pub actions: Vec<String>,
    /// `counts[day][action]`.
    pub counts: Vec<Vec<usize>>,
}

impl SelectionCounts {
    fn new(actions: Vec<String>, days: u32) -> Self {
        let n = actions.len();
        SelectionCounts {
            actions,
            counts: vec![vec![0; n]; days as usize],
        }
    }

    pub fn decisions(&self, day: u32) -> usize {
        self.counts[day as usize].iter().sum()
    }

    /// Share of the day's decisions that chose `action`; 0 on days without
    /// decisions.
    pub fn rates(&self, action: usize) -> Vec<f64> {
        self.counts
            .iter()
            .map(|c| {
                let n: usize = c.iter().sum();
                if n == 0 {
                    0.0
                } else {
                    c[action] as f64 / n as f64
                }
            })
            .collect()
    }
}

/// Per-day share of logged decisions that chose `action`, from the first to
/// the last day present in the log.
pub fn selection_rate_series(log: &[Decision], action: ActionId) -> Result<Vec<(u32, f64)>> {
    let first = log.iter().map(|d| d.day).min().ok_or(Error::Empty("decision log"))?;
    let last = log.iter().map(|d| d.day).max().unwrap_or(first);
    let span = (last - first + 1) as usize;
    let mut hits = vec![0usize; span];
    let mut total = vec![0usize; span];
    for d in log {
        let i = (d.day - first) as usize;
        total[i] += 1;
        hits[i] += usize::from(d.action == action);
    }
    Ok((0..span)
        .map(|i| {
            let rate = if total[i] == 0 { 0.0 } else { hits[i] as f64 / total[i] as f64 };
            (first + i as u32, rate)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub control_mean: f64,
    pub test_mean: f64,
    pub control_total: f64,
    pub test_total: f64,
    /// `(test − control) / control`; absent when the control mean is 0.
    pub relative_delta: Option<f64>,
    /// Welch statistic of test against control; absent when infinite.
    pub t: Option<f64>,
    pub df: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub name: String,
    pub policy: String,
    pub entities: usize,
    pub decisions: usize,
    /// Per-account mean over the window of each metric measured against
    /// the same entity's no-action replay, oriented smaller-is-better.
    pub counterfactual_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRates {
    pub day: u32,
    pub decisions: usize,
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSeries {
    pub arm: String,
    pub actions: Vec<String>,
    pub days: Vec<DayRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmRetrains {
    pub arm: String,
    pub retrains: Vec<RetrainRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub seed: u64,
    pub days: u32,
    pub warmup_days: u32,
    pub window: DayRange,
    pub alpha: f64,
    pub metric_names: Vec<String>,
    pub arms: Vec<ArmSummary>,
    pub metrics: Vec<MetricComparison>,
    pub selection: Vec<SelectionSeries>,
    /// Weight trajectory and model error of every learned arm.
    pub retrains: Vec<ArmRetrains>,
    pub events: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

/// A finished run: the report plus the raw series behind it.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub metrics: DailyMetrics,
    pub selection: Vec<SelectionCounts>,
    pub pro: Vec<Option<ProState>>,
}

impl ExperimentRun {
    /// Welch test of `arm`'s per-entity sums over `after` against `before`.
    pub fn compare_windows(&self, arm: usize, metric: usize, before: DayRange, after: DayRange) -> Result<pro_core::stats::TTest> {
        let a = self.metrics.entity_sums(arm, metric, after);
        let b = self.metrics.entity_sums(arm, metric, before);
        welch_t_test(&a, &b)
    }
}

enum Arm {
    Rule(BaselineRule),
    Pro(Box<ProState>),
}

enum DayPolicy<'a> {
    Rule(&'a BaselineRule),
    Pro(ProDay<'a>),
}

struct Decided {
    decision: Decision,
    request: DecisionRequest,
    row: FeatureRow,
}

struct EntityDay {
    decided: Option<Decided>,
    applied: usize,
    outcome: Outcome,
    counterfactual: MetricRow,
}

fn step_entity(world: &World, policies: &[DayPolicy<'_>], e: usize, day: u32, keep_scores: bool) -> EntityDay {
    let view = world.view(e, day);
    let arm = world.profiles[e].arm;
    let (decided, applied) = if let Some(a) = world.carried_action(e, day) {
        (None, a)
    } else if world.eligible(e, day, &view) {
        let (request, row) = match &policies[arm] {
            DayPolicy::Rule(_) => (
                DecisionRequest {
                    entity: pro_core::EntityId(e as u64),
                    day,
                    features: RawFeatures::new(),
                    signals: world.signals(e, day, &view),
                },
                [f64::NAN; 11],
            ),
            DayPolicy::Pro(_) => (world.request(e, day, &view), world.feature_row(e, day, &view)),
        };
        let mut decision = match &policies[arm] {
            DayPolicy::Rule(rule) => rule.decision(&request),
            DayPolicy::Pro(p) => p.decide(&request),
        };
        if !keep_scores {
            decision.scores = Vec::new();
        }
        let a = decision.action.0;
        (Some(Decided { decision, request, row }), a)
    } else {
        (None, 0)
    };
    let outcome = world.outcome(e, day, applied);
    let counterfactual = if applied == 0 {
        outcome.values
    } else {
        world.counterfactual_baseline(e, day)
    };
    EntityDay {
        decided,
        applied,
        outcome,
        counterfactual,
    }
}

fn apply_event(world: &mut World, arms: &mut [Arm], scenario: &SimScenario, event: &SimEvent) -> Result<()> {
    let scope: Vec<usize> = (0..arms.len()).filter(|&i| event.applies_to(&scenario.arms[i].name)).collect();
    match &event.kind {
        EventKind::LaunchAction { action } => {
            let k = world.action_index(action)?;
            for &i in &scope {
                if let Arm::Pro(p) = &mut arms[i] {
                    p.launch(ActionId(k));
                }
            }
        }
        EventKind::InjectBug { .. } | EventKind::AdversaryAdapts { .. } => world.apply_event(&scope, &event.kind)?,
        EventKind::AddCostMetric { metric, budget, weight } => {
            for &i in &scope {
                if let Arm::Pro(p) = &mut arms[i] {
                    p.add_cost_metric(metric, *budget, *weight)?;
                }
            }
        }
        EventKind::ChangeBudget { metric, budget } => {
            for &i in &scope {
                if let Arm::Pro(p) = &mut arms[i] {
                    p.change_budget(metric, *budget)?;
                }
            }
        }
    }
    Ok(())
}

pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentRun> {
    run_experiment_with_output(plan, &OutputOptions::default())
}

pub fn run_experiment_with_output(plan: &ExperimentPlan, out: &OutputOptions) -> Result<ExperimentRun> {
    plan.validate()?;
    let sc = &plan.scenario;
    let mut world = World::new(sc)?;
    let mut arms: Vec<Arm> = sc
        .arms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(match a.policy {
                PolicySpec::Rule => Arm::Rule(a.config.baseline_rule()?),
                PolicySpec::Pro { warmup_explore, explore } => Arm::Pro(Box::new(ProState::new(
                    a.config.clone(),
                    derive_seed(sc.seed, &[ARM_SEED, i as u64]),
                    plan.warmup_days,
                    warmup_explore,
                    explore,
                )?)),
            })
        })
        .collect::<Result<_>>()?;
    let arm_names: Vec<String> = sc.arms.iter().map(|a| a.name.clone()).collect();
    let mut sink = Sink::open(out, &world, &arm_names)?;

    let n = world.len();
    let days = sc.days;
    let mut metrics = DailyMetrics::new(world.profiles.iter().map(|p| p.arm).collect(), days);
    let mut selection: Vec<SelectionCounts> =
        (0..2).map(|_| SelectionCounts::new(sc.actions.clone(), days)).collect();
    // [arm][day][metric]: sum of oriented (actual − no-action) values
    let specs = world_metric_specs();
    let mut cf_loss = vec![vec![[0.0; N_METRICS]; days as usize]; 2];
    let mut applied_events = Vec::new();

    for day in 0..days {
        for ev in sc.events.iter().filter(|e| e.day == day) {
            apply_event(&mut world, &mut arms, sc, ev)?;
            applied_events.push(ev.describe());
        }
        for (i, arm) in arms.iter_mut().enumerate() {
            if let Arm::Pro(p) = arm {
                if p.begin_day(day)? {
                    if let Some(b) = &p.bundle {
                        sink.bundle(&arm_names[i], day, b)?;
                    }
                }
            }
        }

        let results: Vec<EntityDay> = {
            let policies: Vec<DayPolicy<'_>> = arms
                .iter()
                .map(|a| {
                    Ok(match a {
                        Arm::Rule(r) => DayPolicy::Rule(r),
                        Arm::Pro(p) => DayPolicy::Pro(p.day_policy(day)?),
                    })
                })
                .collect::<Result<_>>()?;
            let world = &world;
            let keep = sink.wants_decisions();
            (0..n).into_par_iter().map(|e| step_entity(world, &policies, e, day, keep)).collect()
        };

        let mut decided_by_arm: Vec<Vec<(DecisionRequest, FeatureRow, ActionId)>> = vec![Vec::new(), Vec::new()];
        for (e, r) in results.into_iter().enumerate() {
            let arm = world.profiles[e].arm;
            metrics.set(e, day, &r.outcome.values);
            for (j, spec) in specs.iter().enumerate() {
                cf_loss[arm][day as usize][j] += orient_metric(r.outcome.values[j], spec, r.counterfactual[j])?;
            }
            sink.event(&arm_names[arm], e, day, r.applied, &world.actions, &r.outcome.values)?;
            let decided_action = r.decided.as_ref().map(|d| d.decision.action.0);
            world.advance(e, day, decided_action, r.applied, &r.outcome);
            if let Some(d) = r.decided {
                selection[arm].counts[day as usize][d.decision.action.0] += 1;
                sink.decision(&arm_names[arm], &d.decision)?;
                if matches!(arms[arm], Arm::Pro(_)) {
                    decided_by_arm[arm].push((d.request, d.row, d.decision.action));
                }
            }
        }
        for (i, arm) in arms.iter_mut().enumerate() {
            if let Arm::Pro(p) = arm {
                p.record_decisions(day, std::mem::take(&mut decided_by_arm[i]));
                let m = &metrics;
                p.record_outcomes(day, &|e| {
                    let r = m.row(e as usize, day);
                    [r[0], r[1], r[2], r[3]]
                });
            }
        }
    }

    let window = plan.window();
    let sizes = world.arm_sizes();
    let mut comparisons = Vec::new();
    for (j, name) in WORLD_METRICS.iter().enumerate() {
        let control = metrics.entity_sums(0, j, window);
        let test = metrics.entity_sums(1, j, window);
        let tt = welch_t_test(&test, &control)?;
        let (ct, tt_total): (f64, f64) = (control.iter().sum(), test.iter().sum());
        comparisons.push(MetricComparison {
            metric: name.to_string(),
            control_mean: tt.mean_b,
            test_mean: tt.mean_a,
            control_total: ct,
            test_total: tt_total,
            relative_delta: relative_delta(tt.mean_b, tt.mean_a),
            t: tt.t.is_finite().then_some(tt.t),
            df: tt.df,
            p: tt.p,
            significant: tt.p < plan.alpha,
        });
    }
    let arm_summaries = (0..2)
        .map(|i| {
            let mut loss = [0.0; N_METRICS];
            for d in window.start..window.end {
                for (acc, v) in loss.iter_mut().zip(cf_loss[i][d as usize]) {
                    *acc += v;
                }
            }
            ArmSummary {
                name: arm_names[i].clone(),
                policy: match sc.arms[i].policy {
                    PolicySpec::Rule => "rule".into(),
                    PolicySpec::Pro { .. } => "pro".into(),
                },
                entities: sizes[i],
                decisions: selection[i].counts.iter().flatten().sum(),
                counterfactual_loss: loss.iter().map(|l| l / sizes[i].max(1) as f64).collect(),
            }
        })
        .collect();
    let selection_series = (0..2)
        .map(|i| SelectionSeries {
            arm: arm_names[i].clone(),
            actions: sc.actions.clone(),
            days: (0..days)
                .map(|d| DayRates {
                    day: d,
                    decisions: selection[i].decisions(d),
                    rates: (0..sc.actions.len()).map(|k| selection[i].rates(k)[d as usize]).collect(),
                })
                .collect(),
        })
        .collect();
    let retrains = arms
        .iter()
        .enumerate()
        .filter_map(|(i, a)| match a {
            Arm::Pro(p) => Some(ArmRetrains {
                arm: arm_names[i].clone(),
                retrains: p.retrains.clone(),
            }),
            Arm::Rule(_) => None,
        })
        .collect();
    let report = ExperimentReport {
        scenario: sc.name.clone(),
        seed: sc.seed,
        days,
        warmup_days: plan.warmup_days,
        window,
        alpha: plan.alpha,
        metric_names: WORLD_METRICS.iter().map(|m| m.to_string()).collect(),
        arms: arm_summaries,
        metrics: comparisons,
        selection: selection_series,
        retrains,
        events: applied_events,
    };
    let pro = arms
        .into_iter()
        .map(|a| match a {
            Arm::Pro(p) => Some(*p),
            Arm::Rule(_) => None,
        })
        .collect();
    let run = ExperimentRun {
        report,
        metrics,
        selection,
        pro,
    };
    sink.finish(&run, &arm_names)?;
    Ok(run)
}
