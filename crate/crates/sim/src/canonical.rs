//! The built-in scenarios: a mixed population of benign and automated
//! accounts on two networks, and five experiments run on it.

use pro_core::config::{MpcSettings, RuleSettings, RunConfig, TrainingSettings};
use pro_core::metrics::{BudgetSpec, HorizonConfig, MetricSpec};
use pro_core::policy::RuleKind;
use pro_core::reward::RewardConfig;
use pro_core::transform::{FeatureTransformSpec, TransformStep};
use pro_core::Result;

use crate::archetype::{Archetype, BetaParams};
use crate::effects::{ActionEffect, EffectTable};
use crate::events::{EventKind, SimEvent};
use crate::scenario::{world_metric_specs, ArmSpec, PolicySpec, SimScenario, SMS_DOLLARS};

pub const ACTIONS: [&str; 9] = [
    "none",
    "disable",
    "compromise_recovery",
    "invalidate_sessions",
    "session_limit",
    "invalidate_automated_session",
    "warning",
    "sms_challenge",
    "captcha",
];

/// Actions available on the smaller network before any launch.
pub const NETWORK_B_ACTIONS: [&str; 5] = [
    "none",
    "disable",
    "compromise_recovery",
    "invalidate_sessions",
    "invalidate_automated_session",
];

pub const CONTROL: &str = "control";
pub const TEST: &str = "test";

/// Population size and run length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Size {
    pub entities_per_arm: usize,
    pub days: u32,
}

impl Size {
    pub const FULL: Size = Size {
        entities_per_arm: 20_000,
        days: 60,
    };

    pub fn new(entities_per_arm: usize, days: u32) -> Self {
        Size { entities_per_arm, days }
    }
}

#[allow(clippy::too_many_arguments)]
fn archetype(
    name: &str,
    share: f64,
    rate: f64,
    rate_shape: f64,
    weight: [u32; 2],
    activity: f64,
    feedback: f64,
    automation: (f64, f64),
    abuse: (f64, f64),
    age: [u32; 2],
    clients: [f64; 4],
    sessions: f64,
    prior_recovery: f64,
) -> Archetype {
    Archetype {
        name: name.into(),
        share,
        scraping_rate: rate,
        rate_shape,
        poisson: true,
        request_weight: weight,
        activity,
        feedback,
        automation: BetaParams {
            a: automation.0,
            b: automation.1,
        },
        abuse: BetaParams { a: abuse.0, b: abuse.1 },
        age_days: age,
        client_weights: clients,
        sessions,
        prior_recovery,
    }
}

pub fn archetypes() -> Vec<Archetype> {
    vec![
        archetype("BenignCasual", 0.40, 0.05, 0.0, [1, 1], 0.6, 0.002, (2.0, 6.0), (1.0, 9.0), [180, 3000], [0.5, 0.4, 0.1, 0.0], 1.5, 0.05),
        archetype("BenignPowerUser", 0.15, 0.3, 0.0, [1, 1], 0.92, 0.004, (9.0, 4.0), (1.5, 8.0), [365, 4000], [0.3, 0.3, 0.4, 0.0], 4.0, 0.1),
        archetype("ScraperBot", 0.20, 60.0, 2.0, [1, 4], 0.97, 0.0, (10.0, 2.5), (5.0, 3.0), [2, 200], [0.05, 0.05, 0.1, 0.8], 8.0, 0.3),
        archetype("AdaptiveAdversary", 0.10, 30.0, 3.0, [2, 6], 0.95, 0.001, (8.0, 4.0), (4.0, 4.0), [30, 800], [0.05, 0.1, 0.8, 0.05], 3.0, 0.2),
        archetype("LowInformationUser", 0.15, 0.5, 0.0, [1, 2], 0.5, 0.003, (5.0, 5.0), (2.0, 6.0), [0, 30], [0.35, 0.35, 0.25, 0.05], 1.2, 0.0),
    ]
}

const SMS_COST: f64 = 0.10;

pub fn effects() -> EffectTable {
    let mut t = EffectTable::default();
    let e = ActionEffect::new;
    // (compliance, abuse multiplier, activity multiplier, feedback delta)
    let rows: [(&str, [ActionEffect; 8]); 5] = [
        (
            "BenignCasual",
            [
                e(0.0, 0.0, 0.0, 0.10),
                e(0.6, 0.2, 0.3, 0.05),
                e(0.85, 0.5, 0.6, 0.015),
                e(0.9, 0.5, 0.75, 0.01),
                e(0.97, 0.5, 0.8, 0.003),
                e(0.9, 0.5, 0.6, 0.03),
                e(0.95, 0.5, 0.5, 0.01).with_cost(SMS_COST),
                e(0.9, 0.5, 0.5, 0.015),
            ],
        ),
        (
            "BenignPowerUser",
            [
                e(0.0, 0.0, 0.0, 0.15),
                e(0.7, 0.2, 0.3, 0.06),
                e(0.9, 0.5, 0.6, 0.02),
                e(0.95, 0.5, 0.8, 0.005),
                e(0.95, 0.5, 0.8, 0.005),
                e(0.88, 0.5, 0.6, 0.03),
                e(0.92, 0.5, 0.5, 0.01).with_cost(SMS_COST),
                e(0.85, 0.5, 0.5, 0.015),
            ],
        ),
        (
            "ScraperBot",
            [
                e(0.0, 0.0, 0.0, 0.0),
                e(0.05, 0.05, 0.5, 0.0),
                e(0.6, 0.3, 1.0, 0.0),
                e(0.02, 0.02, 0.5, 0.0),
                e(0.4, 0.1, 1.0, 0.0),
                e(0.5, 0.6, 1.0, 0.0),
                e(0.1, 0.05, 1.0, 0.0).with_cost(SMS_COST),
                e(0.1, 0.05, 1.0, 0.0),
            ],
        ),
        (
            "AdaptiveAdversary",
            [
                e(0.3, 0.0, 0.0, 0.01),
                e(0.3, 0.2, 0.8, 0.01),
                e(0.7, 0.4, 1.0, 0.0),
                e(0.1, 0.05, 1.0, 0.0),
                e(0.5, 0.3, 1.0, 0.0),
                e(0.1, 0.1, 1.0, 0.0),
                e(0.2, 0.1, 1.0, 0.0).with_cost(SMS_COST),
                e(0.2, 0.1, 1.0, 0.0),
            ],
        ),
        (
            "LowInformationUser",
            [
                e(0.0, 0.0, 0.0, 0.05),
                e(0.4, 0.2, 0.3, 0.03),
                e(0.85, 0.5, 0.6, 0.01),
                e(0.8, 0.5, 0.7, 0.01),
                e(0.95, 0.5, 0.8, 0.004),
                e(0.9, 0.5, 0.6, 0.03),
                e(0.92, 0.5, 0.5, 0.01).with_cost(SMS_COST),
                e(0.85, 0.5, 0.5, 0.015),
            ],
        ),
    ];
    for (arch, effects) in rows {
        for (action, effect) in ACTIONS[1..].iter().zip(effects) {
            t.set(arch, action, effect);
        }
    }
    t
}

pub fn feature_transform() -> FeatureTransformSpec {
    use TransformStep::*;
    let col = |c: &str| c.to_string();
    FeatureTransformSpec {
        steps: vec![
            Passthrough { column: col("bias") },
            Passthrough { column: col("auto_max") },
            Passthrough { column: col("auto_mean") },
            Passthrough { column: col("abuse_score") },
            Log1p { column: col("account_age") },
            Log1p { column: col("requests_yday") },
            Standardize {
                column: col("requests_yday"),
                mean: None,
                std: None,
            },
            Passthrough { column: col("active_yday") },
            Log1p { column: col("sessions") },
            Standardize {
                column: col("days_since_recovery"),
                mean: None,
                std: None,
            },
            OneHot {
                column: col("client"),
                cardinality: 5,
            },
            Passthrough { column: col("feedback_14d") },
            HistoryWindowSum { action: 1, days: 14 },
        ],
    }
}

/// Learned-policy configuration shared by the built-in scenarios: scraping,
/// days active and feedback, weighted so that a lost active day is worth
/// `weights[1]` weighted requests.
pub fn base_config(rule: RuleKind, allowed: Option<&[&str]>) -> RunConfig {
    let specs = world_metric_specs();
    RunConfig {
        seed: 0,
        metrics: specs[..3].to_vec(),
        actions: ACTIONS.iter().map(|a| a.to_string()).collect(),
        allowed_actions: allowed.map(|a| a.iter().map(|s| s.to_string()).collect()),
        budgets: Vec::new(),
        weights: Some(vec![1.0, 30.0, 30.0]),
        reward: RewardConfig::default(),
        training: TrainingSettings::default(),
        horizon: HorizonConfig::default(),
        mpc: MpcSettings::default(),
        rule: match rule {
            RuleKind::A => RuleSettings {
                kind: RuleKind::A,
                s1: 0.85,
                s2: 1.0,
                n1: 0,
                n2: 0,
                disable_action: "disable".into(),
                recovery_action: None,
            },
            RuleKind::B => RuleSettings {
                kind: RuleKind::B,
                s1: 0.85,
                s2: 0.6,
                n1: 30,
                n2: 30,
                disable_action: "disable".into(),
                recovery_action: Some("compromise_recovery".into()),
            },
        },
        features: feature_transform(),
        metric_features: Default::default(),
    }
}

fn scenario(name: &str, description: &str, seed: u64, size: Size, control: ArmSpec, test: ArmSpec) -> SimScenario {
    SimScenario {
        name: name.into(),
        description: description.into(),
        seed,
        days: size.days,
        entities_per_arm: size.entities_per_arm,
        gate: 0.6,
        score_noise: 0.1,
        archetypes: archetypes(),
        actions: ACTIONS.iter().map(|a| a.to_string()).collect(),
        effects: effects(),
        arms: vec![control, test],
        events: Vec::new(),
    }
}

fn arm(name: &str, policy: PolicySpec, config: RunConfig) -> ArmSpec {
    ArmSpec {
        name: name.into(),
        policy,
        config,
    }
}

/// Rule A in control, the learned policy in test.
pub fn s1(seed: u64, size: Size) -> SimScenario {
    scenario(
        "s1",
        "rule A against the learned policy on network A",
        seed,
        size,
        arm(CONTROL, PolicySpec::Rule, base_config(RuleKind::A, None)),
        arm(TEST, PolicySpec::pro(), base_config(RuleKind::A, None)),
    )
}

/// Rule A in both arms.
pub fn aa(seed: u64, size: Size) -> SimScenario {
    scenario(
        "aa",
        "identical rule A policies in both arms",
        seed,
        size,
        arm(CONTROL, PolicySpec::Rule, base_config(RuleKind::A, None)),
        arm(TEST, PolicySpec::Rule, base_config(RuleKind::A, None)),
    )
}

/// Day the mid-run event of s2 to s5 fires.
pub fn event_day(size: Size) -> u32 {
    size.days / 2
}

/// Daily SMS budget per account used by [`s2`].
pub const SMS_BUDGET_PER_ENTITY: f64 = 0.001;

/// Learned policy in both arms; the test arm starts paying attention to SMS
/// spend under a tight daily budget at the event day.
pub fn s2(seed: u64, size: Size) -> SimScenario {
    s2_with_budget(seed, size, SMS_BUDGET_PER_ENTITY * size.entities_per_arm as f64)
}

pub fn s2_with_budget(seed: u64, size: Size, sms_budget: f64) -> SimScenario {
    let mut sc = scenario(
        "s2",
        "SMS dollar cost added with a tight budget",
        seed,
        size,
        arm(CONTROL, PolicySpec::pro(), base_config(RuleKind::A, None)),
        arm(TEST, PolicySpec::pro(), base_config(RuleKind::A, None)),
    );
    sc.events.push(SimEvent::in_arm(
        event_day(size),
        TEST,
        EventKind::AddCostMetric {
            metric: SMS_DOLLARS.into(),
            budget: Some(sms_budget),
            weight: 1.0,
        },
    ));
    sc
}

/// Network B under rule B; the test arm gains session limits at the event day.
pub fn s3(seed: u64, size: Size) -> SimScenario {
    let config = base_config(RuleKind::B, Some(&NETWORK_B_ACTIONS));
    let mut sc = scenario(
        "s3",
        "session_limit launched mid-run on network B",
        seed,
        size,
        arm(CONTROL, PolicySpec::pro(), config.clone()),
        arm(TEST, PolicySpec::pro(), config),
    );
    sc.events.push(SimEvent::in_arm(
        event_day(size),
        TEST,
        EventKind::LaunchAction {
            action: "session_limit".into(),
        },
    ));
    sc
}

/// Warnings break in the test arm at the event day.
pub fn s4(seed: u64, size: Size) -> SimScenario {
    let mut sc = s1(seed, size);
    sc.name = "s4".into();
    sc.description = "warning action breaks in the test arm".into();
    sc.events.push(SimEvent::in_arm(
        event_day(size),
        TEST,
        EventKind::InjectBug {
            action: "warning".into(),
            activity_multiplier: 0.02,
            abuse_multiplier: 0.0,
            feedback_delta: 0.9,
        },
    ));
    sc
}

/// The adaptive adversary stops reacting to warnings, everywhere.
pub fn s5(seed: u64, size: Size) -> SimScenario {
    let mut sc = s1(seed, size);
    sc.name = "s5".into();
    sc.description = "adversaries learn to ignore warnings".into();
    sc.events.push(SimEvent::world(
        event_day(size),
        EventKind::AdversaryAdapts {
            action: "warning".into(),
            archetype: "AdaptiveAdversary".into(),
            abuse_multiplier: 1.0,
        },
    ));
    sc
}

/// Every built-in scenario at the given size, checked.
pub fn all(seed: u64, size: Size) -> Result<Vec<SimScenario>> {
    let list = vec![s1(seed, size), aa(seed, size), s2(seed, size), s3(seed, size), s4(seed, size), s5(seed, size)];
    for s in &list {
        s.validate()?;
    }
    Ok(list)
}

/// Metric spec lookup for callers building their own configs.
pub fn metric(name: &str) -> Option<MetricSpec> {
    world_metric_specs().into_iter().find(|m| m.name == name)
}

/// Adds a budget to both arms of a scenario.
pub fn with_budget(mut sc: SimScenario, metric: &str, budget: f64) -> SimScenario {
    for a in &mut sc.arms {
        a.config.budgets.push(BudgetSpec::new(metric, budget));
    }
    sc
}
