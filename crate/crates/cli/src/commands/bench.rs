//! `neuropong bench`: iteration-throughput measurement across modes and
//! network sizes.

use std::path::PathBuf;
use std::str::FromStr;

use neuropong_core::bench::{run_bench, BenchMode};
use neuropong_core::report;

use super::{default_out, OutDir};
use crate::manifest::RunManifest;
use crate::{config, BenchArgs, CliError, CliResult};

pub fn bench(
    args: BenchArgs,
    overrides: &[(String, String)],
    out: Option<PathBuf>,
    quiet: bool,
) -> CliResult<()> {
    let mut cfg = config::resolve(args.config.as_deref(), overrides, args.seed, None)?;
    if let Some(modes) = &args.modes {
        cfg.bench.modes = parse_mode_list(modes)?;
    }
    if let Some(sizes) = &args.sizes {
        cfg.bench.sizes = parse_size_list(sizes)?;
    }
    if let Some(warmup) = args.warmup {
        cfg.bench.warmup = warmup;
    }
    if let Some(n) = args.iterations {
        cfg.bench.n_iterations = n;
    }
    cfg.bench
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;

    let mut out = OutDir::create(default_out(out, "bench"))?;
    let mut manifest = RunManifest::begin("bench", Some(cfg.clone()));
    manifest.seed = Some(cfg.experiment.seed);
    out.save_manifest(&mut manifest)?;

    let outcome = run_bench(&cfg)
        .map_err(|e| CliError::runtime(e.to_string()))
        .and_then(|bench_report| {
            out.write(
                "bench_report_csv",
                "bench_report.csv",
                &report::bench_report_csv(&bench_report),
            )?;
            out.write(
                "bench_samples_csv",
                "bench_samples.csv",
                &report::bench_samples_csv(&bench_report),
            )?;
            Ok(bench_report)
        });
    let bench_report = match outcome {
        Ok(r) => r,
        Err(e) => {
            manifest.finish(Err(e.message.clone()));
            out.save_manifest(&mut manifest)?;
            return Err(e);
        }
    };
    manifest.finish(Ok(()));
    out.save_manifest(&mut manifest)?;

    for warning in &bench_report.warnings {
        eprintln!("warning: {warning}");
    }
    if quiet {
        let line = serde_json::json!({
            "command": "bench",
            "status": "complete",
            "out_dir": out.root().display().to_string(),
            "entries": bench_report.entries.len(),
            "warnings": bench_report.warnings,
        });
        println!("{line}");
    } else {
        for e in &bench_report.entries {
            println!(
                "{} {}x{}: median {} s/iteration (p10 {}, p90 {}, n {})",
                e.mode, e.n_input, e.n_output, e.median_s, e.p10_s, e.p90_s, e.n_samples
            );
        }
        println!("artifacts in {}", out.root().display());
    }
    Ok(())
}

fn parse_mode_list(spec: &str) -> CliResult<Vec<BenchMode>> {
    spec.split(',')
        .map(|term| {
            BenchMode::from_str(term.trim())
                .map_err(|_| CliError::usage(format!("--modes: unknown mode `{}`", term.trim())))
        })
        .collect()
}

fn parse_size_list(spec: &str) -> CliResult<Vec<(usize, usize)>> {
    let term_error = |term: &str| {
        CliError::usage(format!(
            "--sizes: `{term}` is not a size of the form INxOUT, e.g. 32x32"
        ))
    };
    spec.split(',')
        .map(|term| {
            let term = term.trim();
            let (n_in, n_out) = term.split_once('x').ok_or_else(|| term_error(term))?;
            let n_in = n_in.trim().parse().map_err(|_| term_error(term))?;
            let n_out = n_out.trim().parse().map_err(|_| term_error(term))?;
            Ok((n_in, n_out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_lists_parse_both_modes() {
        assert_eq!(
            parse_mode_list("no-plasticity, with-plasticity").unwrap(),
            vec![BenchMode::NoPlasticity, BenchMode::WithPlasticity]
        );
        assert_eq!(parse_mode_list("nonsense").unwrap_err().code, 1);
    }

    #[test]
    fn size_lists_parse_dimension_pairs() {
        assert_eq!(
            parse_size_list("32x32, 64x16").unwrap(),
            vec![(32, 32), (64, 16)]
        );
        for spec in ["32", "x32", "32x", "32xx32", "ax b"] {
            assert_eq!(parse_size_list(spec).unwrap_err().code, 1, "{spec}");
        }
    }
}
