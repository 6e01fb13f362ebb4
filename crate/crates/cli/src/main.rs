//! `pro`: train, decide, tune and simulate from the command line.
//!
//! Every failure ends with one JSON object on stderr,
//! `{"error": {"code": ..., "message": ...}}`, and a nonzero exit code.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pro_core::config::RunConfig;
use pro_core::jsonl;
use pro_core::mpc::{draw_sample, tune_weights};
use pro_core::policy::{select_action_greedy, select_action_thompson, DecisionRequest, PolicyContext};
use pro_core::reward::train_bundle;
use pro_core::training::{training_sets, ObservationRecord};
use pro_core::{ModelBundle, WeightVector};
use pro_sim::canonical::{self, Size};
use pro_sim::{run_experiment_with_output, ExperimentPlan, ExperimentReport, OutputOptions, SimScenario};
use serde_json::json;

#[derive(Parser)]
#[command(name = "pro", version, about = "Predictive response optimization for abuse enforcement")]
struct Cli {
    /// Run configuration (TOML or JSON). For `simulate` and `experiment` this
    /// is a scenario file instead.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration or scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Where output files go. Without it, results are printed.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the raw logs.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Also write every decision with its per-action scores. Large.
        #[arg(long)]
        decisions: bool,
    },
    /// Run a scenario as an A/B experiment and report the arm comparison.
    Experiment {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 14)]
        warmup: u32,
        #[arg(long, default_value_t = 14)]
        window: u32,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Fit a model bundle from logged observations.
    Train {
        /// Observation records, one JSON object per line.
        #[arg(long)]
        observations: PathBuf,
        /// Training day; only outcomes complete by this day are used.
        /// Defaults to the day after the last complete outcome.
        #[arg(long)]
        day: Option<u32>,
    },
    /// Choose an action for each decision request.
    Decide {
        #[arg(long)]
        bundle: PathBuf,
        /// Decision requests, one JSON object per line.
        #[arg(long)]
        requests: PathBuf,
        /// Comma-separated weights; defaults to the configured ones.
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
        /// Posterior means instead of Thompson draws.
        #[arg(long)]
        greedy: bool,
    },
    /// Retune the weight vector against the configured budgets.
    Tune {
        #[arg(long)]
        bundle: PathBuf,
        /// The period's decision requests, one JSON object per line.
        #[arg(long)]
        requests: PathBuf,
        /// Day of the requests to sample; defaults to the latest.
        #[arg(long)]
        period: Option<u32>,
        #[arg(long, value_delimiter = ',')]
        weights: Option<Vec<f64>>,
    },
    /// Summarize a report written by `experiment` or `simulate`.
    Report {
        /// `report.json`, or the directory holding it.
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario: s1, s2, s3, s4, s5 or aa. Ignored with --config.
    #[arg(long, default_value = "s1")]
    scenario: String,
    /// Accounts per arm for a built-in scenario.
    #[arg(long, default_value_t = Size::FULL.entities_per_arm)]
    entities: usize,
    #[arg(long, default_value_t = Size::FULL.days)]
    days: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug)]
struct Failure {
    code: &'static str,
    message: String,
}

impl From<pro_core::Error> for Failure {
    fn from(e: pro_core::Error) -> Self {
        Failure {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        pro_core::Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        pro_core::Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: "usage",
        message: message.into(),
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&usage(e.to_string().trim_end())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&f),
    }
}

fn fail(f: &Failure) -> ExitCode {
    let body = json!({"error": {"code": f.code, "message": f.message}});
    eprintln!("{body}");
    ExitCode::from(if f.code == "usage" { 2 } else { 1 })
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Simulate { scenario: args, decisions } => {
            let dir = cli.out_dir.clone().ok_or_else(|| usage("simulate needs --out-dir"))?;
            let sc = scenario(&cli, args)?;
            let mut plan = ExperimentPlan::new(sc);
            // short runs still get a report
            let days = plan.scenario.days;
            plan.warmup_days = plan.warmup_days.min(days / 2);
            plan.window_days = plan.window_days.min(days - plan.warmup_days);
            let opts = OutputOptions {
                decisions: *decisions,
                ..OutputOptions::everything(&dir)
            };
            let run = run_experiment_with_output(&plan, &opts)?;
            let r = &run.report;
            println!(
                "{}",
                json!({"scenario": r.scenario, "seed": r.seed, "days": r.days, "arms": r.arms.iter().map(|a| json!({"name": a.name, "entities": a.entities, "decisions": a.decisions})).collect::<Vec<_>>(), "out_dir": dir})
            );
            Ok(())
        }
        Command::Experiment {
            scenario: args,
            warmup,
            window,
            alpha,
        } => {
            let mut plan = ExperimentPlan::new(scenario(&cli, args)?);
            plan.warmup_days = *warmup;
            plan.window_days = *window;
            plan.alpha = *alpha;
            let opts = match &cli.out_dir {
                Some(d) => OutputOptions::to_dir(d),
                None => OutputOptions::default(),
            };
            let run = run_experiment_with_output(&plan, &opts)?;
            print_report(&run.report, Format::Text);
            Ok(())
        }
        Command::Train { observations, day } => {
            let cfg = run_config(&cli)?;
            let records: Vec<ObservationRecord> = jsonl::read_path(observations)?;
            let now = match day {
                Some(d) => *d,
                None => records
                    .iter()
                    .map(|r| r.day + r.horizon_days)
                    .max()
                    .ok_or(pro_core::Error::Empty("observation log"))?,
            };
            let transforms = cfg.transforms();
            let grid = training_sets(
                &records,
                now,
                &cfg.training.window(),
                &cfg.metrics,
                cfg.actions.len(),
                &transforms,
                cfg.seed,
            )?;
            let bundle = train_bundle(cfg.metrics.clone(), cfg.action_specs(), &transforms, &grid, &cfg.reward, now)?;
            emit(&cli, "bundle.json", &serde_json::to_string_pretty(&bundle)?)
        }
        Command::Decide {
            bundle,
            requests,
            weights,
            greedy,
        } => {
            let cfg = run_config(&cli)?;
            let bundle = load_bundle(bundle)?;
            let reqs: Vec<DecisionRequest> = jsonl::read_path(requests)?;
            let w = weight_vector(&cfg, weights)?;
            let allowed = cfg.allowed()?;
            let rule = cfg.baseline_rule()?;
            let exploring = BTreeSet::new();
            let ctx = PolicyContext::new(&bundle, &w, &allowed, &exploring, &rule)?;
            let decisions: Vec<_> = reqs
                .iter()
                .map(|r| {
                    if *greedy {
                        select_action_greedy(r, &ctx)
                    } else {
                        select_action_thompson(r, &ctx, cfg.seed)
                    }
                })
                .collect();
            let mut buf = Vec::new();
            jsonl::write(&mut buf, &decisions)?;
            emit(&cli, "decisions.jsonl", &String::from_utf8_lossy(&buf))
        }
        Command::Tune {
            bundle,
            requests,
            period,
            weights,
        } => {
            let cfg = run_config(&cli)?;
            let bundle = load_bundle(bundle)?;
            let reqs: Vec<DecisionRequest> = jsonl::read_path(requests)?;
            let period = match period {
                Some(p) => *p,
                None => reqs.iter().map(|r| r.day).max().ok_or(pro_core::Error::Empty("request log"))?,
            };
            let fraction = cfg.mpc.sample_fraction;
            let sample = draw_sample(&reqs, period, fraction, cfg.seed)?;
            let warm: Vec<_> = cfg.allowed()?.into_iter().filter(|a| !bundle.action_is_cold(a.0)).collect();
            let report = tune_weights(
                &weight_vector(&cfg, weights)?,
                &cfg.grid()?,
                &sample,
                &bundle,
                &warm,
                &cfg.constraints(fraction)?,
            )?;
            emit(&cli, "tuning.json", &serde_json::to_string_pretty(&report)?)
        }
        Command::Report { path, format } => {
            let file = if path.is_dir() { path.join("report.json") } else { path.clone() };
            let report = ExperimentReport::from_json(&fs::read_to_string(&file)?)?;
            print_report(&report, *format);
            Ok(())
        }
    }
}

fn scenario(cli: &Cli, args: &ScenarioArgs) -> Result<SimScenario, Failure> {
    let mut sc = match &cli.config {
        Some(path) => SimScenario::load(path)?,
        None => {
            let size = Size::new(args.entities, args.days);
            let seed = cli.seed.unwrap_or(1);
            match args.scenario.as_str() {
                "s1" => canonical::s1(seed, size),
                "s2" => canonical::s2(seed, size),
                "s3" => canonical::s3(seed, size),
                "s4" => canonical::s4(seed, size),
                "s5" => canonical::s5(seed, size),
                "aa" => canonical::aa(seed, size),
                other => return Err(usage(format!("unknown scenario `{other}`"))),
            }
        }
    };
    if let Some(s) = cli.seed {
        sc.seed = s;
    }
    sc.validate()?;
    Ok(sc)
}

fn run_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| usage("this command needs --config"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_bundle(path: &Path) -> Result<ModelBundle, Failure> {
    let b: ModelBundle = serde_json::from_str(&fs::read_to_string(path)?)?;
    b.validate()?;
    Ok(b)
}

fn weight_vector(cfg: &RunConfig, given: &Option<Vec<f64>>) -> Result<WeightVector, Failure> {
    Ok(match given {
        Some(w) => WeightVector::new(w.clone())?,
        None => cfg.initial_weights()?,
    })
}

fn emit(cli: &Cli, name: &str, body: &str) -> Outcome {
    match &cli.out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            fs::write(&path, body)?;
            println!("{}", json!({"wrote": path}));
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(body.as_bytes())?;
            if !body.ends_with('\n') {
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

fn print_report(r: &ExperimentReport, format: Format) {
    if let Format::Json = format {
        println!("{}", r.to_json().unwrap_or_default());
        return;
    }
    println!(
        "{} (seed {}, {} days, window days {}..{}, alpha {})",
        r.scenario,
        r.seed,
        r.days,
        r.window.start,
        r.window.end - 1,
        r.alpha
    );
    for a in &r.arms {
        println!("  arm {:<8} {:<5} {:>7} accounts {:>9} decisions", a.name, a.policy, a.entities, a.decisions);
    }
    println!("  {:<28} {:>12} {:>12} {:>9} {:>10}", "metric", "control", "test", "delta", "p");
    for m in &r.metrics {
        let delta = m.relative_delta.map_or("-".to_string(), |d| format!("{:+.1}%", d * 100.0));
        let mark = if m.significant { " *" } else { "" };
        println!(
            "  {:<28} {:>12.4} {:>12.4} {:>9} {:>10.3e}{mark}",
            m.metric, m.control_mean, m.test_mean, delta, m.p
        );
    }
    for e in &r.events {
        println!("  event: {e}");
    }
}
