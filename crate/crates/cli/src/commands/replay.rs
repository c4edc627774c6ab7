//! `neuropong replay`: recorded logs back into plot-ready CSV tables,
//! reproducing the run's own metrics files byte for byte.

use std::fs;
use std::path::PathBuf;

use neuropong_core::experiment::mean_reward_windows;
use neuropong_core::report::{
    self, curve_csv, heatmap_csv, parse_iterations_csv, parse_run_ndjson,
};

use super::{core_error, default_out, OutDir};
use crate::manifest::RunManifest;
use crate::{CliError, CliResult, ReplayArgs};

pub fn replay(
    args: ReplayArgs,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
    quiet: bool,
) -> CliResult<()> {
    if let Some((path, _)) = overrides.first() {
        return Err(CliError::usage(format!(
            "--{path}: replay takes no configuration overrides"
        )));
    }
    if args.window == 0 {
        return Err(CliError::usage("--window must be positive"));
    }
    let text = fs::read_to_string(&args.input).map_err(|e| {
        CliError::usage(format!("cannot read log {}: {e}", args.input.display()))
    })?;

    let mut out = OutDir::create(default_out(out, "replay"))?;
    let mut manifest = RunManifest::begin("replay", None);
    manifest.input = Some(args.input.display().to_string());
    out.save_manifest(&mut manifest)?;

    let outcome = if looks_like_ndjson(&text) {
        replay_ndjson(&text, args.window, &mut out)
    } else {
        replay_csv(&text, args.window, &mut out)
    };
    let summary = match outcome {
        Ok(summary) => summary,
        Err(e) => {
            manifest.finish(Err(e.message.clone()));
            out.save_manifest(&mut manifest)?;
            return Err(e);
        }
    };
    manifest.finish(Ok(()));
    out.save_manifest(&mut manifest)?;

    if quiet {
        let line = serde_json::json!({
            "command": "replay",
            "status": "complete",
            "out_dir": out.root().display().to_string(),
            "format": summary.format,
            "iterations": summary.iterations,
            "evals": summary.evals,
        });
        println!("{line}");
    } else {
        println!(
            "replayed {} {} iterations, {} evaluations",
            summary.format, summary.iterations, summary.evals
        );
        println!("artifacts in {}", out.root().display());
    }
    Ok(())
}

struct ReplaySummary {
    format: &'static str,
    iterations: usize,
    evals: usize,
}

/// The NDJSON run log yields every table: reward moving average, the
/// catch-fraction curve, the mean-reward curve and the weight heat map.
fn replay_ndjson(text: &str, window: usize, out: &mut OutDir) -> CliResult<ReplaySummary> {
    let data = parse_run_ndjson(text).map_err(core_error)?;
    let rewards: Vec<f64> = data.iterations.iter().map(|log| log.reward).collect();

    let ma = report::reward_moving_average(&rewards, window).map_err(core_error)?;
    out.write("reward_ma_csv", "reward_ma.csv", &curve_csv("reward_ma", &ma))?;

    // The iteration-0 record is the pre-training evaluation; the run's
    // own curve file starts at the first post-training one.
    let curve: Vec<(usize, f64)> = data.evals.iter().copied().filter(|&(i, _)| i > 0).collect();
    out.write(
        "catch_fraction_csv",
        "catch_fraction.csv",
        &curve_csv("catch_fraction", &curve),
    )?;

    if let Some(header) = &data.header {
        if header.eval_every > 0 {
            let windows = mean_reward_windows(&rewards, header.eval_every);
            out.write(
                "mean_reward_csv",
                "mean_reward.csv",
                &curve_csv("mean_reward", &windows),
            )?;
        }
    }
    if let Some(weights) = &data.weights {
        out.write(
            "weights_heatmap_csv",
            "weights_heatmap.csv",
            &heatmap_csv(weights).map_err(core_error)?,
        )?;
    }
    Ok(ReplaySummary {
        format: "ndjson",
        iterations: data.iterations.len(),
        evals: data.evals.len(),
    })
}

/// An iterations CSV carries rewards only, so it yields just the moving
/// average.
fn replay_csv(text: &str, window: usize, out: &mut OutDir) -> CliResult<ReplaySummary> {
    let rows = parse_iterations_csv(text).map_err(core_error)?;
    let rewards: Vec<f64> = rows.iter().map(|row| row.reward).collect();
    let ma = report::reward_moving_average(&rewards, window).map_err(core_error)?;
    out.write("reward_ma_csv", "reward_ma.csv", &curve_csv("reward_ma", &ma))?;
    Ok(ReplaySummary {
        format: "csv",
        iterations: rows.len(),
        evals: 0,
    })
}

fn looks_like_ndjson(text: &str) -> bool {
    text.lines()
        .find(|line| !line.trim().is_empty())
        .is_none_or(|line| line.trim_start().starts_with('{'))
}
