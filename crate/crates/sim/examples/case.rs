//! Runs one built-in scenario and prints the comparison.
//!
//! `cargo run --release -p pro-sim --example case -- s1 20000 60 [seed]`
//!
//! Set `CASE_OUT` to a directory to also write the run's logs there.

use std::time::Instant;

use pro_sim::canonical::{self, Size};
use pro_sim::{run_experiment_with_output, ExperimentPlan, OutputOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map(String::as_str).unwrap_or("s1");
    let n: usize = args.get(1).map_or(Ok(2000), |s| s.parse())?;
    let days: u32 = args.get(2).map_or(Ok(40), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(1), |s| s.parse())?;
    let size = Size::new(n, days);
    let sc = match name {
        "s1" => canonical::s1(seed, size),
        "aa" => canonical::aa(seed, size),
        "s2" => match args.get(4) {
            Some(b) => canonical::s2_with_budget(seed, size, b.parse()?),
            None => canonical::s2(seed, size),
        },
        "s3" => canonical::s3(seed, size),
        "s4" => canonical::s4(seed, size),
        "s5" => canonical::s5(seed, size),
        other => return Err(format!("unknown scenario {other}").into()),
    };
    let t = Instant::now();
    let out = match std::env::var("CASE_OUT") {
        Ok(dir) => OutputOptions::everything(dir),
        Err(_) => OutputOptions::default(),
    };
    let run = run_experiment_with_output(&ExperimentPlan::new(sc), &out)?;
    let r = &run.report;
    println!("{} seed {} in {:.1?}", r.scenario, r.seed, t.elapsed());
    for m in &r.metrics {
        println!(
            "{:<28} control {:>10.4} test {:>10.4} delta {:>8} p {:.4}",
            m.metric,
            m.control_mean,
            m.test_mean,
            m.relative_delta.map_or("-".into(), |d| format!("{:+.3}", d)),
            m.p
        );
    }
    for (arm, j) in [(0, 0), (1, 0), (0, 3), (1, 3)] {
        let blocks: Vec<String> = (0..days / 5)
            .map(|b| {
                let t: f64 = (b * 5..b * 5 + 5).map(|d| run.metrics.day_totals(arm, d)[j]).sum();
                format!("{:.4}", t / 5.0 / n as f64)
            })
            .collect();
        println!("arm {arm} metric {j} per 5-day block: {}", blocks.join(" "));
    }
    for s in &r.selection {
        println!("{}: {}", s.arm, s.actions.join(" "));
        for d in s.days.iter() {
            let rates: Vec<String> = d.rates.iter().map(|x| format!("{:.3}", x)).collect();
            println!("  day {:>3} n {:>6} {}", d.day, d.decisions, rates.join(" "));
        }
    }
    for a in &r.retrains {
        if let Some(last) = a.retrains.last() {
            println!("{} last retrain day {} weights {:?} nmse {:?}", a.arm, last.day, last.weights, last.nmse);
        }
    }
    Ok(())
}
