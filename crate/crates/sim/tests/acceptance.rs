// Acceptance suite: one PASS/FAIL line per criterion.
//
// Runs as a plain binary (harness = false). The process fails when any
// criterion fails, except those listed in KNOWN_RED, which are still printed
// as FAIL.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::oracles::{self, rel_err, MpcCase};
use common::{sample_of, table_bundle};
use nalgebra::{DMatrix, DVector};
use pro_core::linalg::{fit_ridge, select_lambda_gcv};
use pro_core::metrics::DayRange;
use pro_core::mpc::{tune_weights, CandidateGrid, Constraint};
use pro_core::policy::{
    select_action_greedy, select_action_thompson, selection_entropy, BaselineRule, DecisionRequest, PolicyContext,
    RuleConfig, RuleKind, RuleSignals,
};
use pro_core::reward::{fit_cell, Dataset, MetricActionModel, RewardConfig};
use pro_core::stats::welch_t_test;
use pro_core::training::{decay_sample, ObservationRecord, Source, OBSERVATION_SCHEMA_VERSION};
use pro_core::transform::{FeatureTransformSpec, TransformStep};
use pro_core::{ActionId, EntityId, ModelBundle, RawFeatures, WeightVector};
use pro_sim::canonical::{self, Size};
use pro_sim::scenario::{world_metric_index, DAYS_ACTIVE, FEEDBACK, SMS_DOLLARS, WEIGHTED_SCRAPING};
use pro_sim::{run_experiment, ExperimentPlan, ExperimentRun};
use rand::Rng;

/// Criteria whose failure does not fail the process. The reasoning is kept
/// in the project notes.
const KNOWN_RED: &[u32] = &[8];

const ALPHA: f64 = 0.05;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn to_na(x: &oracles::Mat, d: usize) -> DMatrix<f64> {
    DMatrix::from_row_iterator(x.len(), d, x.iter().flatten().copied())
}

fn c1_ridge() -> Check {
    let mut r = oracles::rng(101);
    let mut worst = 0.0f64;
    let mut largest = (0, 0);
    for i in 0..100 {
        // the first instance is the largest allowed shape
        let (n, d) = if i == 0 { (1000, 100) } else { (r.random_range(1..=1000), r.random_range(1..=100)) };
        let lambda = 10f64.powf(r.random_range(-2.0..2.0));
        let x = oracles::random_matrix(&mut r, n, d);
        let y: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let fit = fit_ridge(&to_na(&x, d), &DVector::from_vec(y.clone()), lambda).map_err(e2s)?;
        let (theta, sigma) = oracles::ridge(&x, &y, d, lambda);
        let got: Vec<f64> = fit.theta.iter().copied().collect();
        let got_sig: Vec<f64> = fit.sigma.transpose().iter().copied().collect();
        let want_sig: Vec<f64> = sigma.iter().flatten().copied().collect();
        let err = rel_err(&got, &theta).max(rel_err(&got_sig, &want_sig));
        ensure(err < 1e-8, format!("{n}x{d}: relative error {err:e}"))?;
        worst = worst.max(err);
        if n * d > largest.0 * largest.1 {
            largest = (n, d);
        }
        let asym = (&fit.sigma - fit.sigma.transpose()).abs().max();
        ensure(asym <= 1e-12 * fit.sigma.abs().max().max(1.0), format!("{n}x{d}: Σ asymmetric by {asym:e}"))?;
        ensure(fit.sigma.clone().cholesky().is_some(), format!("{n}x{d}: Σ not positive definite"))?;
    }
    Ok(format!("100 instances up to {}x{}, worst relative error {worst:.1e}", largest.0, largest.1))
}

fn c2_predictive() -> Check {
    let model = MetricActionModel {
        metric: 0,
        action: 0,
        theta: vec![3.0],
        sigma: vec![0.5],
        lambda: 1.0,
        epsilon: 0.05,
        transform: FeatureTransformSpec::new(vec![TransformStep::Passthrough { column: "x".into() }]).map_err(e2s)?,
        rows: 10,
        cold: false,
    };
    let p = model.predict(&RawFeatures::new().with("x", 2.0));
    ensure(p.mean == 6.0, format!("μ = {}", p.mean))?;
    ensure((p.variance - 0.1).abs() < 1e-15, format!("σ² = {}", p.variance))?;

    let cfg = RewardConfig::default();
    let mut r = oracles::rng(202);
    let mut queries = 0;
    for cell in 0..6 {
        let (n, d) = (r.random_range(60..400), r.random_range(1..10));
        let steps = (0..d).map(|i| TransformStep::Passthrough { column: format!("c{i}") }).collect();
        let x = oracles::random_matrix(&mut r, n, d);
        let y = (0..n).map(|i| x[i][0] * 2.0 + r.random_range(-0.5..0.5)).collect();
        let data = Dataset {
            transform: FeatureTransformSpec::new(steps).map_err(e2s)?,
            x: to_na(&x, d),
            y: DVector::from_vec(y),
        };
        let m = fit_cell(cell / 3, cell % 3, &data, &cfg).map_err(e2s)?;
        for _ in 0..10_000 {
            let phi: Vec<f64> = (0..d).map(|_| r.random_range(-1e3..1e3)).collect();
            let v = m.predict_phi(&phi).variance;
            ensure(v >= 0.0 && v.is_finite(), format!("cell {cell}: σ² = {v}"))?;
            queries += 1;
        }
    }
    Ok(format!("μ=6, σ²=0.1 exact; {queries} random queries over 6 models, all σ² ≥ 0"))
}

fn c3_gcv() -> Check {
    let mut r = oracles::rng(303);
    let grids: [&[f64]; 3] = [&[0.01, 1.0, 100.0], &RewardConfig::default().lambda_grid, &[1e-3, 0.5, 2.0, 50.0]];
    let shapes = [(10, 3), (25, 4), (8, 6)];
    let mut points = 0;
    for ((n, d), grid) in shapes.into_iter().zip(grids) {
        let x = oracles::random_matrix(&mut r, n, d);
        let y: Vec<f64> = (0..n).map(|i| i as f64 * 0.3 + r.random_range(-1.0..1.0)).collect();
        let sel = select_lambda_gcv(&to_na(&x, d), &DVector::from_vec(y.clone()), grid).map_err(e2s)?;
        let brute: Vec<f64> = grid.iter().map(|&l| oracles::gcv_score(&x, &y, d, l)).collect();
        for ((l, s), b) in sel.scores.iter().zip(&brute) {
            ensure((s - b).abs() <= 1e-9 * b.abs().max(1e-12), format!("{n}x{d} λ={l}: {s} vs {b}"))?;
            points += 1;
        }
        let best = (0..grid.len()).min_by(|&i, &j| brute[i].total_cmp(&brute[j])).unwrap();
        ensure(sel.lambda == grid[best], format!("{n}x{d}: picked λ={} not {}", sel.lambda, grid[best]))?;
    }
    Ok(format!("{points} grid points on 3 datasets agree with explicit hat matrices"))
}

fn rule() -> BaselineRule {
    BaselineRule {
        kind: RuleKind::A,
        config: RuleConfig {
            s1: 0.9,
            s2: 0.7,
            n1: 30,
            n2: 14,
            disable_action: ActionId(1),
            recovery_action: ActionId(2),
        },
    }
}

fn picks(bundle: &ModelBundle, feats: &RawFeatures, w: &WeightVector, seed: u64, draws: u64) -> Result<Vec<ActionId>, String> {
    let allowed: Vec<ActionId> = (0..bundle.n_actions()).map(ActionId).collect();
    let exploring = BTreeSet::new();
    let fb = rule();
    let ctx = PolicyContext::new(bundle, w, &allowed, &exploring, &fb).map_err(e2s)?;
    Ok((0..draws)
        .map(|e| {
            let req = DecisionRequest {
                entity: EntityId(e),
                day: 3,
                features: feats.clone(),
                signals: RuleSignals::default(),
            };
            select_action_thompson(&req, &ctx, seed).action
        })
        .collect())
}

fn c4_thompson() -> Check {
    // ε·Σ = 0.05 · 20 = 1, so the two combined laws are N(0,1) and N(1,1)
    let (bundle, feats) = table_bundle(&[vec![vec![0.0], vec![1.0]]], &[true], 0.05, 20.0);
    let p = picks(&bundle, &feats[0], &WeightVector::ones(1), 2024, 100_000)?;
    let freq = p.iter().filter(|a| a.0 == 0).count() as f64 / p.len() as f64;
    ensure((freq - oracles::PHI_INV_SQRT2).abs() <= 0.005, format!("P(a0) = {freq:.4}"))?;

    let table = vec![vec![vec![2.0, 1.0], vec![1.0, 1.0], vec![0.5, 3.0]]];
    let (bundle, feats) = table_bundle(&table, &[true, false], 0.0, 1.0);
    let w = WeightVector::new(vec![1.0, 0.5]).map_err(e2s)?;
    let allowed: Vec<ActionId> = (0..3).map(ActionId).collect();
    let exploring = BTreeSet::new();
    let fb = rule();
    let ctx = PolicyContext::new(&bundle, &w, &allowed, &exploring, &fb).map_err(e2s)?;
    let req = DecisionRequest {
        entity: EntityId(0),
        day: 0,
        features: feats[0].clone(),
        signals: RuleSignals::default(),
    };
    let greedy = select_action_greedy(&req, &ctx).action;
    ensure(greedy == ActionId(1), "greedy oracle disagrees")?;
    let all = picks(&bundle, &feats[0], &w, 9, 1000)?;
    ensure(all.iter().all(|a| *a == greedy), "ε=0 is not deterministic")?;
    Ok(format!("P(a0) = {freq:.4} vs {:.4}; ε=0 greedy on 1000 draws", oracles::PHI_INV_SQRT2))
}

fn c5_invariances() -> Check {
    let mut r = oracles::rng(505);
    let cases = 40;
    for case in 0..cases {
        let seed = r.random::<u64>();
        let table: Vec<Vec<Vec<f64>>> =
            vec![(0..4).map(|_| vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]).collect()];
        let c = r.random_range(-50.0..50.0);
        let shifted = vec![table[0].iter().map(|m| m.iter().map(|v| v + c).collect()).collect()];
        let w = WeightVector::new(vec![0.7, 1.3]).map_err(e2s)?;
        let (b1, f1) = table_bundle(&table, &[true, false], 0.05, 4.0);
        let (b2, f2) = table_bundle(&shifted, &[true, false], 0.05, 4.0);
        let base = picks(&b1, &f1[0], &w, seed, 300)?;
        ensure(base == picks(&b2, &f2[0], &w, seed, 300)?, format!("case {case}: shift by {c} changed a choice"))?;
        let s = 10f64.powf(r.random_range(-2.0..2.0));
        let scaled = w.scaled(s).map_err(e2s)?;
        ensure(base == picks(&b1, &f1[0], &scaled, seed, 300)?, format!("case {case}: scale by {s} changed a choice"))?;
    }
    let table = vec![vec![vec![0.0], vec![0.3], vec![0.6]]];
    let mut h: Vec<f64> = Vec::new();
    for eps in [0.0, 0.05, 0.5] {
        let (bundle, feats) = table_bundle(&table, &[true], eps, 1.0);
        let mut counts = [0usize; 3];
        for p in picks(&bundle, &feats[0], &WeightVector::ones(1), 77, 10_000)? {
            counts[p.0] += 1;
        }
        h.push(selection_entropy(&counts) + 0.0);
    }
    ensure(h[0] <= h[1] && h[1] <= h[2], format!("entropies {h:?}"))?;
    Ok(format!("{cases} paired shift/scale cases; entropy {:.3} ≤ {:.3} ≤ {:.3}", h[0], h[1], h[2]))
}

fn c6_decay() -> Check {
    let (h, now, trials) = (7.0, 100u32, 100_000u64);
    let ages = [0u32, 7, 21];
    let expected = [1.0, 0.5, 0.125];
    let recs: Vec<ObservationRecord> = ages
        .iter()
        .enumerate()
        .map(|(i, a)| ObservationRecord {
            schema_version: OBSERVATION_SCHEMA_VERSION,
            entity: EntityId(i as u64),
            day: now - a,
            features: RawFeatures::new(),
            action: ActionId(0),
            horizon_days: 1,
            metrics: Default::default(),
            source: Source::Baseline,
        })
        .collect();
    let refs: Vec<&ObservationRecord> = recs.iter().collect();
    let mut kept = [0u64; 3];
    for t in 0..trials {
        for r in decay_sample(&refs, now, h, t).map_err(e2s)? {
            kept[r.entity.0 as usize] += 1;
        }
    }
    let rates: Vec<f64> = kept.iter().map(|k| *k as f64 / trials as f64).collect();
    for i in 0..3 {
        ensure((rates[i] - expected[i]).abs() <= 0.01, format!("age {}: {:.4}", ages[i], rates[i]))?;
    }
    ensure(rates.windows(2).all(|w| w[0] >= w[1]), "not monotone in age")?;
    Ok(format!("inclusion {:.4} / {:.4} / {:.4} at ages 0, h, 3h", rates[0], rates[1], rates[2]))
}

fn random_case(seed: u64) -> (MpcCase, f64) {
    let mut r = oracles::rng(seed);
    let n = r.random_range(3..12);
    let means: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|_| {
            let mut acts = vec![vec![r.random_range(0.0..10.0), 0.0, 0.0]];
            for _ in 1..4 {
                acts.push(vec![r.random_range(0.0..10.0), r.random_range(0.0..3.0), r.random_range(0.0..3.0)]);
            }
            acts
        })
        .collect();
    let base = r.random_range(0.1..3.0);
    let weights = FACTORS.iter().map(|f| vec![1.0, base * f, 1.0]).collect();
    let distances = FACTORS.iter().map(|f: &f64| f.ln().powi(2)).collect();
    let bounds = vec![(1, r.random_range(0.0..(n as f64 * 1.5))), (2, r.random_range(0.0..(n as f64 * 1.5)))];
    let case = MpcCase {
        means,
        abuse: vec![true, false, false],
        weights,
        distances,
        bounds,
    };
    (case, base)
}

const FACTORS: [f64; 5] = [0.5, 0.8, 1.0, 1.25, 2.0];

fn tune(case: &MpcCase, base: f64, loosen: f64) -> Result<(usize, f64), String> {
    let (bundle, feats) = table_bundle(&case.means, &case.abuse, 0.05, 1.0);
    let current = WeightVector::new(vec![1.0, base, 1.0]).map_err(e2s)?;
    let grid = CandidateGrid::uniform(vec![1], &FACTORS);
    let cs: Vec<Constraint> = case.bounds.iter().map(|&(metric, b)| Constraint { metric, bound: b * loosen }).collect();
    let allowed: Vec<ActionId> = (0..4).map(ActionId).collect();
    let r = tune_weights(&current, &grid, &sample_of(&feats), &bundle, &allowed, &cs).map_err(e2s)?;
    Ok((r.selected, r.candidates[r.selected].abuse_total))
}

fn c7_mpc() -> Check {
    let mut loosened = 0;
    for seed in 0..1000 {
        let (case, base) = random_case(seed);
        let (selected, abuse) = tune(&case, base, 1.0)?;
        ensure(selected == case.select(), format!("instance {seed}: picked {selected}, oracle {}", case.select()))?;
        let feasible = case.weights.iter().any(|w| {
            let (_, c) = case.totals(w);
            case.bounds.iter().all(|&(j, b)| c[j] <= b)
        });
        if feasible {
            let (_, loose) = tune(&case, base, 10.0)?;
            ensure(loose <= abuse, format!("instance {seed}: loosening raised abuse {abuse} → {loose}"))?;
            loosened += 1;
        }
    }

    let table = vec![vec![vec![5.0, 0.0], vec![1.0, 2.0], vec![0.0, 9.0]]; 3];
    let (bundle, feats) = table_bundle(&table, &[true, false], 0.05, 1.0);
    let sample = sample_of(&feats);
    let allowed: Vec<ActionId> = (0..3).map(ActionId).collect();
    let w = WeightVector::new(vec![1.0, 0.3]).map_err(e2s)?;
    let single = CandidateGrid::uniform(vec![1], &[1.0]);
    let tight = [Constraint { metric: 1, bound: 0.0 }];
    let r = tune_weights(&w, &single, &sample, &bundle, &allowed, &tight).map_err(e2s)?;
    ensure(r.weights == w, "single candidate moved the weights")?;
    let grid = CandidateGrid::uniform(vec![1], &FACTORS);
    let open = [Constraint { metric: 1, bound: f64::INFINITY }];
    let r = tune_weights(&w, &grid, &sample, &bundle, &allowed, &open).map_err(e2s)?;
    let min_abuse = r.candidates.iter().map(|c| c.abuse_total).fold(f64::INFINITY, f64::min);
    ensure(r.candidates[r.selected].abuse_total == min_abuse, "infinite budget did not minimise abuse")?;
    Ok(format!("1000 instances match enumeration; loosening checked on {loosened}; trivial grids hold"))
}

fn full(sc: pro_sim::SimScenario) -> Result<ExperimentRun, String> {
    run_experiment(&ExperimentPlan::new(sc)).map_err(e2s)
}

fn idx(name: &str) -> Result<usize, String> {
    world_metric_index(name).map_err(e2s)
}

fn action(run: &ExperimentRun, arm: usize, name: &str) -> Result<usize, String> {
    run.selection[arm]
        .actions
        .iter()
        .position(|a| a == name)
        .ok_or_else(|| format!("no action {name}"))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c8_aa() -> Check {
    let mut clean = 0;
    let mut flagged = Vec::new();
    for seed in 1..=20u64 {
        let run = full(canonical::aa(seed, Size::FULL))?;
        let hits: Vec<&str> = run
            .report
            .metrics
            .iter()
            .filter(|m| m.p <= ALPHA)
            .map(|m| m.metric.as_str())
            .collect();
        if hits.is_empty() {
            clean += 1;
        } else {
            flagged.push(format!("{seed}:{}", hits.join("+")));
        }
    }
    let detail = format!("{clean}/20 replications with every p > 0.05; flagged {}", flagged.join(" "));
    if clean >= 18 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_s1(run: &ExperimentRun) -> Check {
    let r = &run.report;
    let get = |n: &str| r.metric(n).ok_or_else(|| format!("no metric {n}"));
    let abuse = get(WEIGHTED_SCRAPING)?;
    ensure(abuse.test_mean < abuse.control_mean && abuse.p < ALPHA, format!("abuse Δ {:?} p {:.3}", abuse.relative_delta, abuse.p))?;
    // days active is larger-is-better, feedback smaller-is-better
    let active = get(DAYS_ACTIVE)?;
    ensure(!(active.test_mean < active.control_mean && active.p < ALPHA), format!("days active degraded, p {:.3}", active.p))?;
    let feedback = get(FEEDBACK)?;
    ensure(!(feedback.test_mean > feedback.control_mean && feedback.p < ALPHA), format!("feedback degraded, p {:.3}", feedback.p))?;
    let pct = |m: &pro_sim::experiment::MetricComparison| m.relative_delta.map_or("-".into(), |d| format!("{:+.1}%", d * 100.0));
    Ok(format!(
        "abuse {} (p {:.1e}); days active {} (p {:.2}); feedback {} (p {:.2})",
        pct(abuse),
        abuse.p,
        pct(active),
        active.p,
        pct(feedback),
        feedback.p
    ))
}

fn c10_s3() -> Check {
    let size = Size::FULL;
    let e = canonical::event_day(size);
    let run = full(canonical::s3(1, size))?;
    let sl = action(&run, 1, "session_limit")?;
    let rates = run.selection[1].rates(sl);
    let jitter = |from: u32, to: u32| -> f64 {
        let d: Vec<f64> = (from + 1..to).map(|t| (rates[t as usize] - rates[t as usize - 1]).abs()).collect();
        mean(&d)
    };
    let early = jitter(e, e + 7);
    let late = jitter(size.days - 7, size.days);
    ensure(early > late, format!("no transient: early change {early:.4}, late {late:.4}"))?;

    let last5 = DayRange::new(size.days - 5, size.days);
    let j = idx(WEIGHTED_SCRAPING)?;
    let control = run.metrics.entity_sums(0, j, last5);
    let test = run.metrics.entity_sums(1, j, last5);
    let tt = welch_t_test(&test, &control).map_err(e2s)?;
    ensure(tt.t < 0.0 && tt.p < ALPHA, format!("last-5-day abuse t {:.2} p {:.3}", tt.t, tt.p))?;
    Ok(format!(
        "session_limit daily change {early:.3} → {late:.3}; last-5-day abuse {:.2} vs {:.2} (p {:.1e})",
        tt.mean_a, tt.mean_b, tt.p
    ))
}

fn c11_s4() -> Check {
    let size = Size::FULL;
    let e = canonical::event_day(size);
    let run = full(canonical::s4(1, size))?;
    let k = action(&run, 1, "warning")?;
    let rates = run.selection[1].rates(k);
    let pre = mean(&rates[(e - 7) as usize..e as usize]);
    let at = rates[(e + 3) as usize];
    ensure(at < 0.01, format!("warning rate {at:.4} on event day + 3"))?;
    Ok(format!("warning rate {:.2}% before, {:.2}% three days after the bug", pre * 100.0, at * 100.0))
}

fn c12_s5() -> Check {
    let size = Size::FULL;
    let e = canonical::event_day(size);
    let run = full(canonical::s5(1, size))?;
    let k = action(&run, 1, "warning")?;
    let rates = run.selection[1].rates(k);
    let pre = mean(&rates[(e - 7) as usize..e as usize]);
    let post = mean(&rates[(e + 7) as usize..(e + 14) as usize]);
    ensure(post <= 0.5 * pre, format!("warning rate {pre:.4} → {post:.4}"))?;
    let tt = run
        .compare_windows(1, idx(WEIGHTED_SCRAPING)?, DayRange::new(e - 7, e), DayRange::new(e + 7, e + 14))
        .map_err(e2s)?;
    ensure(!(tt.t > 0.0 && tt.p < ALPHA), format!("abuse rose {:.3} → {:.3}, p {:.3}", tt.mean_b, tt.mean_a, tt.p))?;
    Ok(format!(
        "warning rate {:.1}% → {:.1}%; abuse {:.2} → {:.2} (p {:.2})",
        pre * 100.0,
        post * 100.0,
        tt.mean_b,
        tt.mean_a,
        tt.p
    ))
}

fn c13_s2() -> Check {
    let size = Size::FULL;
    let e = canonical::event_day(size);
    let run = full(canonical::s2(1, size))?;
    let (before, after) = (DayRange::new(e - 14, e), run.report.window);
    let sms = run.compare_windows(1, idx(SMS_DOLLARS)?, before, after).map_err(e2s)?;
    ensure(sms.mean_b > 0.0, "no SMS spend before the change")?;
    let cut = 1.0 - sms.mean_a / sms.mean_b;
    ensure(cut >= 0.5, format!("SMS spend cut {:.1}%", cut * 100.0))?;
    let abuse = run.compare_windows(1, idx(WEIGHTED_SCRAPING)?, before, after).map_err(e2s)?;
    ensure(
        !(abuse.t > 0.0 && abuse.p < ALPHA),
        format!("abuse rose {:.3} → {:.3}, p {:.3}", abuse.mean_b, abuse.mean_a, abuse.p),
    )?;
    Ok(format!(
        "SMS spend cut {:.0}% ({:.4} → {:.4} $/entity/window-day); abuse {:.2} → {:.2} (p {:.2})",
        cut * 100.0,
        sms.mean_b / before.len() as f64,
        sms.mean_a / after.len() as f64,
        abuse.mean_b,
        abuse.mean_a,
        abuse.p
    ))
}

fn c14_welch() -> Check {
    let r = welch_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(e2s)?;
    let u = welch_t_test(&oracles::WELCH_UNEQUAL_A, &oracles::WELCH_UNEQUAL_B).map_err(e2s)?;
    for (got, want) in [(r, oracles::WELCH_SHIFTED), (u, oracles::WELCH_UNEQUAL)] {
        ensure((got.t - want.0).abs() <= 1e-6, format!("t {} vs {}", got.t, want.0))?;
        ensure((got.p - want.1).abs() <= 1e-4, format!("p {} vs {}", got.p, want.1))?;
    }
    Ok(format!("t = {:.6}, p = {:.6}; unequal case t = {:.6}, p = {:.2e}", r.t, r.p, u.t, u.p))
}

fn c15_determinism(first: &ExperimentRun) -> Check {
    let a = first.report.to_json().map_err(e2s)?;
    let b = full(canonical::s1(1, Size::FULL))?.report.to_json().map_err(e2s)?;
    ensure(a == b, "report JSON differs between runs")?;
    Ok(format!("{} bytes identical", a.len()))
}

struct Tally {
    failed: Vec<u32>,
}

impl Tally {
    fn record(&mut self, n: u32, title: &str, budget: Duration, f: impl FnOnce() -> Check) -> Duration {
        let t = Instant::now();
        let outcome = f();
        let took = t.elapsed();
        let outcome = match outcome {
            Ok(d) if took > budget => Err(format!("{d}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(d) => println!("PASS {n:>2} {title}: {d} [{took:.1?}]"),
            Err(d) => {
                let note = if KNOWN_RED.contains(&n) { " (known red)" } else { "" };
                println!("FAIL {n:>2} {title}{note}: {d} [{took:.1?}]");
                self.failed.push(n);
            }
        }
        took
    }
}

fn main() {
    let mut tally = Tally { failed: vec![] };
    let secs = Duration::from_secs;
    tally.record(1, "ridge oracle equivalence", secs(30), c1_ridge);
    tally.record(2, "predictive law", secs(5), c2_predictive);
    tally.record(3, "GCV correctness", secs(5), c3_gcv);
    tally.record(4, "Thompson calibration", secs(10), c4_thompson);
    tally.record(5, "policy invariances", secs(30), c5_invariances);
    tally.record(6, "decay sampling law", secs(10), c6_decay);
    tally.record(7, "MPC soundness", secs(30), c7_mpc);
    tally.record(8, "A/A null experiment", secs(600), c8_aa);

    let mut s1 = None;
    let s1_time = tally.record(9, "S1 direction", secs(900), || {
        let run = full(canonical::s1(1, Size::FULL))?;
        let out = c9_s1(&run);
        s1 = Some(run);
        out
    });
    tally.record(10, "new-action launch dynamic", secs(900), c10_s3);
    tally.record(11, "injected bug dynamic", secs(600), c11_s4);
    tally.record(12, "adversary adaptation dynamic", secs(600), c12_s5);
    tally.record(13, "SMS cost budget dynamic", secs(600), c13_s2);
    tally.record(14, "Welch oracle", secs(1), c14_welch);
    tally.record(15, "determinism", s1_time * 2, || match &s1 {
        Some(run) => c15_determinism(run),
        None => Err("S1 run unavailable".into()),
    });

    let blocking: Vec<u32> = tally.failed.iter().copied().filter(|n| !KNOWN_RED.contains(n)).collect();
    println!("{} of 15 criteria pass", 15 - tally.failed.len());
    if !blocking.is_empty() {
        eprintln!("failing criteria: {blocking:?}");
        std::process::exit(1);
    }
}
