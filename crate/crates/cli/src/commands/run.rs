//! `neuropong run`: one training experiment and its artifact directory.

use std::path::PathBuf;

use neuropong_core::experiment::run_experiment;

use super::{default_out, final_catch, write_run_artifacts, OutDir};
use crate::manifest::RunManifest;
use crate::{config, CliError, CliResult, RunArgs};

pub fn run(
    args: RunArgs,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
    quiet: bool,
) -> CliResult<()> {
    let cfg = config::resolve(
        args.config.config.as_deref(),
        overrides,
        args.config.seed,
        args.config.iterations,
    )?;
    let mut out = OutDir::create(default_out(out, "run"))?;
    let mut manifest = RunManifest::begin("run", Some(cfg.clone()));
    manifest.seed = Some(cfg.experiment.seed);
    out.save_manifest(&mut manifest)?;

    let outcome = run_experiment(&cfg)
        .map_err(|e| CliError::runtime(e.to_string()))
        .and_then(|output| write_run_artifacts(&mut out, &cfg, &output).map(|()| output));
    let output = match outcome {
        Ok(output) => output,
        Err(e) => {
            manifest.finish(Err(e.message.clone()));
            out.save_manifest(&mut manifest)?;
            return Err(e);
        }
    };
    manifest.finish(Ok(()));
    out.save_manifest(&mut manifest)?;

    let metrics = &output.metrics;
    if quiet {
        let line = serde_json::json!({
            "command": "run",
            "status": "complete",
            "out_dir": out.root().display().to_string(),
            "seed": cfg.experiment.seed,
            "iterations": cfg.experiment.n_iterations,
            "initial_catch_fraction": metrics.initial_catch_fraction,
            "final_catch_fraction": final_catch(metrics),
            "diagonal_dominance": metrics.diagonal_dominance,
        });
        println!("{line}");
    } else {
        println!(
            "run complete: seed {}, {} iterations",
            cfg.experiment.seed, cfg.experiment.n_iterations
        );
        println!(
            "  catch fraction {} -> {}",
            metrics.initial_catch_fraction,
            final_catch(metrics)
        );
        println!("  diagonal dominance {}", metrics.diagonal_dominance);
        println!("  artifacts in {}", out.root().display());
    }
    Ok(())
}
