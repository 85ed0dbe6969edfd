//! The experiments runner: configuration, dispatch and output files.

pub mod config;
pub mod output;
mod runs;

use std::time::Instant;

pub use config::{ConfigLayer, Experiment, ExperimentConfig, Format};
pub use output::{Bound, Check, Outcome, RunManifest, Table};

use crate::error::Result;

/// Computes the outcome of `config` without touching the file system.
pub fn evaluate(config: &ExperimentConfig) -> Result<Outcome> {
    match config.experiment {
        Experiment::Axioms => runs::axioms(config),
        Experiment::Groupoid => runs::groupoid(config),
        Experiment::Tangent => runs::tangent(config),
        Experiment::Walks => runs::walks(config),
        Experiment::Compat => runs::compat(config),
        Experiment::Drafts => runs::drafts(config),
        Experiment::Distort => runs::distort(config),
    }
}

/// Runs the experiment and writes its table, attachments and manifest into
/// `config.out`. Nothing is written if the experiment errors.
pub fn run(config: &ExperimentConfig) -> Result<(Outcome, RunManifest)> {
    let start = Instant::now();
    let outcome = evaluate(config)?;
    let manifest = output::write_outputs(config, &outcome, start.elapsed().as_secs_f64())?;
    Ok((outcome, manifest))
}
