use pro_sim::canonical::{self, Size};
use pro_sim::effects::ActionEffect;
use pro_sim::events::EventKind;
use pro_sim::world::World;
use pro_sim::SimScenario;

const BOT: &str = "ScraperBot";
const CASUAL: &str = "BenignCasual";

fn scenario(n: usize) -> SimScenario {
    canonical::s1(17, Size::new(n, 20))
}

fn of_archetype(world: &World, name: &str) -> Vec<usize> {
    let a = world.archetype_index(name).unwrap();
    (0..world.len()).filter(|&e| world.profiles[e].archetype == a).collect()
}

#[test]
fn fixed_rate_bot_scrapes_its_rate_and_nothing_when_disabled() {
    let mut sc = scenario(300);
    let bot = sc.archetypes.iter_mut().find(|a| a.name == BOT).unwrap();
    bot.scraping_rate = 100.0;
    bot.rate_shape = 0.0;
    bot.poisson = false;
    bot.request_weight = [1, 1];
    let world = World::new(&sc).unwrap();
    let disable = world.action_index("disable").unwrap();
    let bots = of_archetype(&world, BOT);
    assert!(!bots.is_empty());
    for &e in &bots {
        for day in 0..5 {
            assert_eq!(world.outcome(e, day, 0).values[0], 100.0);
            assert_eq!(world.outcome(e, day, disable).values[0], 0.0);
        }
    }
}

#[test]
fn no_action_counterfactual_is_the_actual_day() {
    let world = World::new(&scenario(500)).unwrap();
    for e in 0..world.len() {
        for day in [0, 3, 11] {
            assert_eq!(world.counterfactual_baseline(e, day), world.outcome(e, day, 0).values);
        }
    }
}

#[test]
fn disabled_bot_counterfactual_is_its_base_draw() {
    let world = World::new(&scenario(2000)).unwrap();
    let disable = world.action_index("disable").unwrap();
    let mut seen = 0.0;
    for e in of_archetype(&world, BOT) {
        let w = world.profiles[e].weight as f64;
        for day in 0..4 {
            let actual = world.outcome(e, day, disable);
            let cf = world.counterfactual_baseline(e, day);
            assert_eq!(actual.values[0], 0.0);
            // the attempted count is drawn before the action is looked at
            assert_eq!(cf[0], actual.attempted as f64 * w);
            seen += cf[0];
        }
    }
    assert!(seen > 0.0);
}

#[test]
fn blocking_a_benign_user_never_adds_active_days() {
    let world = World::new(&scenario(1500)).unwrap();
    for name in [CASUAL, "BenignPowerUser", "LowInformationUser"] {
        for e in of_archetype(&world, name) {
            for day in 0..6 {
                let cf = world.counterfactual_baseline(e, day);
                for k in 1..world.actions.len() {
                    assert!(cf[1] >= world.outcome(e, day, k).values[1], "{name} entity {e} action {k}");
                }
            }
        }
    }
}

#[test]
fn sms_challenge_compliance_monte_carlo() {
    let mut sc = scenario(14_000);
    sc.effects.set(CASUAL, "sms_challenge", ActionEffect::new(0.9, 1.0, 0.0, 0.0));
    let activity = sc.archetypes.iter().find(|a| a.name == CASUAL).unwrap().activity;
    let world = World::new(&sc).unwrap();
    let sms = world.action_index("sms_challenge").unwrap();
    let casual = of_archetype(&world, CASUAL);
    let paired: Vec<f64> = casual
        .iter()
        .take(10_000)
        .map(|&e| world.outcome(e, 2, 0).values[1] - world.outcome(e, 2, sms).values[1])
        .collect();
    assert_eq!(paired.len(), 10_000);
    let n = paired.len() as f64;
    let drop = paired.iter().sum::<f64>() / n;
    let expected = (1.0 - 0.9) * activity;
    // each paired difference is Bernoulli(expected)
    let sd = (expected * (1.0 - expected) / n).sqrt();
    assert!((drop - expected).abs() <= 3.0 * sd, "drop {drop}, expected {expected} ± {}", 3.0 * sd);
}

fn mean_activity(world: &World, entities: &[usize], action: usize, days: std::ops::Range<u32>) -> f64 {
    let mut total = 0.0;
    let mut count = 0.0;
    for &e in entities {
        for d in days.clone() {
            total += world.outcome(e, d, action).values[1];
            count += 1.0;
        }
    }
    total / count
}

#[test]
fn injected_bug_cuts_activity_for_every_archetype() {
    let mut world = World::new(&scenario(4000)).unwrap();
    let warning = world.action_index("warning").unwrap();
    let names = world.archetype_names.clone();
    // 2000 entity-days per archetype before and after
    let groups: Vec<Vec<usize>> = names.iter().map(|n| of_archetype(&world, n).into_iter().take(400).collect()).collect();
    let before: Vec<f64> = groups.iter().map(|g| mean_activity(&world, g, warning, 0..5)).collect();
    let bug: EventKind = serde_json::from_str(r#"{"kind": "inject_bug", "action": "warning"}"#).unwrap();
    world.apply_event(&[0, 1], &bug).unwrap();
    let after: Vec<f64> = groups.iter().map(|g| mean_activity(&world, g, warning, 5..10)).collect();
    for ((n, b), a) in names.iter().zip(&before).zip(&after) {
        assert!(a < b, "{n}: {b} → {a}");
    }
}

#[test]
fn events_only_touch_their_arms() {
    let mut world = World::new(&scenario(50)).unwrap();
    let warning = world.action_index("warning").unwrap();
    let adv = world.archetype_index("AdaptiveAdversary").unwrap();
    let adapt = EventKind::AdversaryAdapts {
        action: "warning".into(),
        archetype: "AdaptiveAdversary".into(),
        abuse_multiplier: 0.95,
    };
    world.apply_event(&[1], &adapt).unwrap();
    assert_eq!(world.effects[1][adv][warning].abuse_multiplier, 0.95);
    assert!(world.effects[0][adv][warning].abuse_multiplier < 0.9);
    let unknown = EventKind::InjectBug {
        action: "teleport".into(),
        activity_multiplier: 0.0,
        abuse_multiplier: 0.0,
        feedback_delta: 0.0,
    };
    assert!(world.apply_event(&[0], &unknown).is_err());
}

#[test]
fn hash_split_is_balanced_and_seeded() {
    let sc = scenario(10_000);
    let a = World::new(&sc).unwrap();
    let [c, t] = a.arm_sizes();
    assert_eq!(c + t, 20_000);
    // four standard deviations of a fair binomial split
    assert!((c as f64 - 10_000.0).abs() < 4.0 * 70.8, "{c} / {t}");
    let b = World::new(&sc).unwrap();
    assert_eq!(a.profiles, b.profiles);
    let other = World::new(&canonical::s1(18, Size::new(10_000, 20))).unwrap();
    assert_ne!(a.profiles, other.profiles);
}
