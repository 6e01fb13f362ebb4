//! Files written alongside an experiment run.

use std::fs;
use std::path::PathBuf;

use pro_core::jsonl::Appender;
use pro_core::policy::Decision;
use pro_core::{Error, ModelBundle, Result};
use serde::{Deserialize, Serialize};

use crate::experiment::ExperimentRun;
use crate::scenario::WORLD_METRICS;
use crate::world::{World, N_METRICS};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputOptions {
    /// Nothing is written when unset.
    pub dir: Option<PathBuf>,
    /// `events.jsonl`: one line per entity-day with an action or a non-zero
    /// metric.
    #[serde(default)]
    pub events: bool,
    /// `decisions.jsonl`, including per-action scores.
    #[serde(default)]
    pub decisions: bool,
    /// `observations_<arm>.jsonl`: the learner's training store at the end.
    #[serde(default)]
    pub observations: bool,
    /// `bundles/<arm>/day_NNN.json` after every retrain.
    #[serde(default)]
    pub bundles: bool,
}

impl OutputOptions {
    pub fn to_dir(dir: impl Into<PathBuf>) -> Self {
        OutputOptions {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    pub fn everything(dir: impl Into<PathBuf>) -> Self {
        OutputOptions {
            dir: Some(dir.into()),
            events: true,
            decisions: true,
            observations: true,
            bundles: true,
        }
    }
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLine {
    pub arm: String,
    pub entity: u64,
    pub day: u32,
    pub action: String,
    /// Raw values in world metric order.
    pub metrics: [f64; N_METRICS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLine {
    pub arm: String,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PopulationLine<'a> {
    entity: usize,
    arm: &'a str,
    archetype: &'a str,
    request_weight: u32,
    account_age: u32,
    client: usize,
}

pub(crate) struct Sink {
    dir: Option<PathBuf>,
    opts: OutputOptions,
    events: Option<Appender>,
    decisions: Option<Appender>,
}

impl Sink {
    pub(crate) fn open(opts: &OutputOptions, world: &World, arms: &[String]) -> Result<Sink> {
        let Some(dir) = opts.dir.clone() else {
            return Ok(Sink {
                dir: None,
                opts: opts.clone(),
                events: None,
                decisions: None,
            });
        };
        fs::create_dir_all(&dir)?;
        let fresh = |name: &str| -> Result<Appender> {
            let p = dir.join(name);
            if p.exists() {
                fs::remove_file(&p)?;
            }
            Appender::open(&p)
        };
        let mut pop = fresh("population.jsonl")?;
        for (e, p) in world.profiles.iter().enumerate() {
            pop.push(&PopulationLine {
                entity: e,
                arm: &arms[p.arm],
                archetype: &world.archetype_names[p.archetype],
                request_weight: p.weight,
                account_age: p.age0,
                client: p.client,
            })?;
        }
        pop.flush()?;
        Ok(Sink {
            events: if opts.events { Some(fresh("events.jsonl")?) } else { None },
            decisions: if opts.decisions { Some(fresh("decisions.jsonl")?) } else { None },
            dir: Some(dir),
            opts: opts.clone(),
        })
    }

    pub(crate) fn wants_decisions(&self) -> bool {
        self.decisions.is_some()
    }

    pub(crate) fn event(
        &mut self,
        arm: &str,
        entity: usize,
        day: u32,
        action: usize,
        actions: &[String],
        metrics: &[f64; N_METRICS],
    ) -> Result<()> {
        if let Some(out) = &mut self.events {
            if action != 0 || metrics.iter().any(|v| *v != 0.0) {
                out.push(&EventLine {
                    arm: arm.to_string(),
                    entity: entity as u64,
                    day,
                    action: actions[action].clone(),
                    metrics: *metrics,
                })?;
            }
        }
        Ok(())
    }

    pub(crate) fn decision(&mut self, arm: &str, d: &Decision) -> Result<()> {
        if let Some(out) = &mut self.decisions {
            out.push(&DecisionLine {
                arm: arm.to_string(),
                decision: d.clone(),
            })?;
        }
        Ok(())
    }

    pub(crate) fn bundle(&mut self, arm: &str, day: u32, bundle: &ModelBundle) -> Result<()> {
        let (Some(dir), true) = (&self.dir, self.opts.bundles) else {
            return Ok(());
        };
        let d = dir.join("bundles").join(arm);
        fs::create_dir_all(&d)?;
        fs::write(d.join(format!("day_{day:03}.json")), serde_json::to_string(bundle)?)?;
        Ok(())
    }

    pub(crate) fn finish(&mut self, run: &ExperimentRun, arms: &[String]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        for a in [&mut self.events, &mut self.decisions].into_iter().flatten() {
            a.flush()?;
        }
        fs::write(dir.join("report.json"), run.report.to_json()?)?;

        let mut w = csv::Writer::from_path(dir.join("daily.csv")).map_err(csv_err)?;
        let mut header = vec!["arm".to_string(), "day".to_string(), "decisions".to_string()];
        header.extend(WORLD_METRICS.iter().map(|m| m.to_string()));
        header.extend(run.selection[0].actions.iter().map(|a| format!("n_{a}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, arm) in arms.iter().enumerate() {
            for day in 0..run.metrics.days {
                let mut rec = vec![arm.clone(), day.to_string(), run.selection[i].decisions(day).to_string()];
                rec.extend(run.metrics.day_totals(i, day).iter().map(|v| v.to_string()));
                rec.extend(run.selection[i].counts[day as usize].iter().map(|c| c.to_string()));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;

        if self.opts.observations {
            for (i, p) in run.pro.iter().enumerate() {
                if let Some(p) = p {
                    let path = dir.join(format!("observations_{}.jsonl", arms[i]));
                    if path.exists() {
                        fs::remove_file(&path)?;
                    }
                    let mut out = Appender::open(&path)?;
                    for o in p.stored() {
                        out.push(&o.to_record())?;
                    }
                    out.flush()?;
                }
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.into())
}
