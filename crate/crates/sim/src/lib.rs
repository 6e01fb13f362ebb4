//! Synthetic abuse-enforcement world and two-arm experiments on it.
//!
//! A [`scenario::SimScenario`] describes a population of account archetypes,
//! how each archetype responds to each enforcement action, two experiment
//! arms and a schedule of events. [`experiment::run_experiment`] plays it out
//! day by day and compares the arms.

pub mod archetype;
pub mod canonical;
pub mod controller;
pub mod effects;
pub mod events;
pub mod experiment;
pub mod output;
pub mod scenario;
pub mod world;

pub use experiment::{run_experiment, run_experiment_with_output, ExperimentPlan, ExperimentReport, ExperimentRun};
pub use output::OutputOptions;
pub use scenario::SimScenario;
