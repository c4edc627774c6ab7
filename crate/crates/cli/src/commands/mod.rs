//! The four subcommands and their shared artifact plumbing.

mod bench;
mod replay;
mod run;
mod sweep;

pub use bench::bench;
pub use replay::replay;
pub use run::run;
pub use sweep::sweep;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use neuropong_core::config::ExperimentConfig;
use neuropong_core::experiment::{Metrics, RunOutput};
use neuropong_core::report::{self, RunHeader};

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::{CliError, CliResult};

/// An output directory and the artifact map accumulated inside it. Every
/// file goes through [`OutDir::write`], so the manifest lists exactly
/// what exists on disk.
pub(crate) struct OutDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl OutDir {
    pub fn create(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&root)
            .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutDir {
            root,
            artifacts: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes one artifact under its relative path and records it.
    pub fn write(&mut self, name: &str, relative: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::runtime(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
        fs::write(&path, contents)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.artifacts.insert(name.into(), relative.into());
        Ok(())
    }

    /// Records a subdirectory (a sweep's per-seed run) as an artifact.
    pub fn record(&mut self, name: &str, relative: &str) {
        self.artifacts.insert(name.into(), relative.into());
    }

    /// Writes `manifest.toml` carrying the artifacts recorded so far.
    pub fn save_manifest(&self, manifest: &mut RunManifest) -> CliResult<()> {
        manifest.artifacts = self.artifacts.clone();
        let text = toml::to_string_pretty(manifest)
            .map_err(|e| CliError::runtime(format!("manifest serialization: {e}")))?;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, text)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }
}

pub(crate) fn default_out(out: Option<PathBuf>, command: &str) -> PathBuf {
    out.unwrap_or_else(|| Path::new("out").join(command))
}

pub(crate) fn core_error(e: neuropong_core::Error) -> CliError {
    CliError::runtime(e.to_string())
}

pub(crate) fn run_header(cfg: &ExperimentConfig) -> RunHeader {
    RunHeader {
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.experiment.seed,
        n_iterations: cfg.experiment.n_iterations,
        eval_every: cfg.experiment.eval_every,
        n_input: cfg.snn.n_input,
        n_output: cfg.snn.n_output,
        n_columns: cfg.env.n_columns,
        weight_levels: cfg.plasticity.weight_levels,
        w_min: cfg.plasticity.w_min,
        w_max: cfg.plasticity.w_max,
    }
}

/// Writes the full artifact set of one training run: the iteration CSV,
/// the NDJSON log, the weight snapshot and the metrics tables.
pub(crate) fn write_run_artifacts(
    out: &mut OutDir,
    cfg: &ExperimentConfig,
    output: &RunOutput,
) -> CliResult<()> {
    out.write(
        "iterations_csv",
        "iterations.csv",
        &report::iterations_csv(&output.logs),
    )?;
    let ndjson = report::run_ndjson(
        &run_header(cfg),
        &output.logs,
        &output.metrics,
        &output.weights,
    )
    .map_err(core_error)?;
    out.write("run_ndjson", "run.ndjson", &ndjson)?;
    out.write(
        "weights",
        "weights.txt",
        &report::weights_text(&output.weights).map_err(core_error)?,
    )?;
    out.write(
        "catch_fraction_csv",
        "metrics/catch_fraction.csv",
        &report::curve_csv("catch_fraction", &output.metrics.catch_fraction_curve),
    )?;
    out.write(
        "mean_reward_csv",
        "metrics/mean_reward.csv",
        &report::curve_csv("mean_reward", &output.metrics.mean_reward_curve),
    )?;
    out.write(
        "summary",
        "metrics/summary.txt",
        &report::summary_text(&output.metrics),
    )?;
    Ok(())
}

/// The last evaluated catch fraction, falling back to the pre-training
/// one when no evaluation ran.
pub(crate) fn final_catch(metrics: &Metrics) -> f64 {
    metrics
        .catch_fraction_curve
        .last()
        .map_or(metrics.initial_catch_fraction, |&(_, f)| f)
}
