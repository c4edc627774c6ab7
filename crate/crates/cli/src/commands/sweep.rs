//! `neuropong sweep`: independent training runs across a seed list, one
//! artifact directory per seed plus the cross-seed aggregate curve.

use std::path::PathBuf;

use neuropong_core::config::ExperimentConfig;
use neuropong_core::experiment::{run_experiment, RunOutput};
use neuropong_core::report;
use rayon::prelude::*;

use super::{default_out, final_catch, write_run_artifacts, OutDir};
use crate::manifest::RunManifest;
use crate::{config, CliError, CliResult, SweepArgs};

pub fn sweep(
    args: SweepArgs,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
    quiet: bool,
) -> CliResult<()> {
    let seeds = parse_seed_list(&args.seeds)?;
    let cfg = config::resolve(
        args.config.config.as_deref(),
        overrides,
        args.config.seed,
        args.config.iterations,
    )?;
    let mut out = OutDir::create(default_out(out, "sweep"))?;
    let mut manifest = RunManifest::begin("sweep", Some(cfg.clone()));
    manifest.seeds = Some(seeds.clone());
    out.save_manifest(&mut manifest)?;

    let outcome = run_seeds(&cfg, &seeds, args.jobs)
        .and_then(|results| write_sweep_artifacts(&mut out, &cfg, &seeds, results));
    let statuses = match outcome {
        Ok(statuses) => statuses,
        Err(e) => {
            manifest.finish(Err(e.message.clone()));
            out.save_manifest(&mut manifest)?;
            return Err(e);
        }
    };

    let failed: Vec<u64> = statuses
        .iter()
        .filter_map(|s| s.error.is_some().then_some(s.seed))
        .collect();
    let summary = if failed.is_empty() {
        Ok(())
    } else {
        Err(format!("{} of {} seeds failed", failed.len(), seeds.len()))
    };
    manifest.finish(summary.clone());
    out.save_manifest(&mut manifest)?;

    if quiet {
        let line = serde_json::json!({
            "command": "sweep",
            "status": if failed.is_empty() { "complete" } else { "failed" },
            "out_dir": out.root().display().to_string(),
            "seeds": seeds,
            "failed_seeds": failed,
        });
        println!("{line}");
    } else {
        println!("seed      status    final_catch");
        for s in &statuses {
            match &s.error {
                None => println!("{:<9} complete  {}", s.seed, s.final_catch),
                Some(message) => println!("{:<9} failed    {message}", s.seed),
            }
        }
        println!("artifacts in {}", out.root().display());
    }
    summary.map_err(CliError::runtime)
}

struct SeedStatus {
    seed: u64,
    final_catch: f64,
    error: Option<String>,
}

/// Runs every seed to completion, serially or on a worker pool; the
/// result order follows the seed list either way.
fn run_seeds(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    jobs: usize,
) -> CliResult<Vec<(u64, Result<RunOutput, String>)>> {
    let run_one = |&seed: &u64| {
        let mut seeded = cfg.clone();
        seeded.experiment.seed = seed;
        (seed, run_experiment(&seeded).map_err(|e| e.to_string()))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(|| seeds.par_iter().map(run_one).collect()))
}

/// Writes one run directory per seed and, when every seed succeeded, the
/// aggregate catch-fraction curve.
fn write_sweep_artifacts(
    out: &mut OutDir,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    results: Vec<(u64, Result<RunOutput, String>)>,
) -> CliResult<Vec<SeedStatus>> {
    let mut statuses = Vec::with_capacity(seeds.len());
    let mut curves = Vec::new();
    for (seed, result) in results {
        let relative = format!("seed_{seed}");
        match result {
            Ok(output) => {
                let mut seeded = cfg.clone();
                seeded.experiment.seed = seed;
                let mut seed_out = OutDir::create(out.root().join(&relative))?;
                let mut seed_manifest = RunManifest::begin("run", Some(seeded.clone()));
                seed_manifest.seed = Some(seed);
                write_run_artifacts(&mut seed_out, &seeded, &output)?;
                seed_manifest.finish(Ok(()));
                seed_out.save_manifest(&mut seed_manifest)?;
                out.record(&relative, &relative);
                curves.push(output.metrics.catch_fraction_curve.clone());
                statuses.push(SeedStatus {
                    seed,
                    final_catch: final_catch(&output.metrics),
                    error: None,
                });
            }
            Err(message) => statuses.push(SeedStatus {
                seed,
                final_catch: f64::NAN,
                error: Some(message),
            }),
        }
    }
    if curves.len() == seeds.len() {
        let aggregate = report::aggregate_catch_csv(&curves)
            .map_err(|e| CliError::runtime(e.to_string()))?;
        out.write("aggregate_csv", "aggregate.csv", &aggregate)?;
    }
    Ok(statuses)
}

/// Parses a seed list: comma-separated terms, each a value or an
/// inclusive `lo..hi` range.
fn parse_seed_list(spec: &str) -> CliResult<Vec<u64>> {
    let term_error =
        |term: &str| CliError::usage(format!("--seeds: `{term}` is not a seed or lo..hi range"));
    let mut seeds = Vec::new();
    for term in spec.split(',') {
        let term = term.trim();
        match term.split_once("..") {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|_| term_error(term))?;
                let hi: u64 = hi.trim().parse().map_err(|_| term_error(term))?;
                if lo > hi {
                    return Err(CliError::usage(format!("--seeds: empty range `{term}`")));
                }
                seeds.extend(lo..=hi);
            }
            None => seeds.push(term.parse().map_err(|_| term_error(term))?),
        }
    }
    Ok(seeds)
}
