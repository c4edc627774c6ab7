//! Serialization of run artifacts: the iteration CSV, the NDJSON run
//! log, weight snapshots, metric curves and benchmark tables. Every
//! format lives here, writer next to parser, so the two cannot drift.
//!
//! Floats are printed with Rust's shortest round-trip formatting; a
//! parsed value is bit-identical to the written one, which is what makes
//! replayed outputs byte-for-byte reproducible.

use serde::{Deserialize, Serialize};

use crate::bench::BenchReport;
use crate::error::{Error, Result};
use crate::experiment::{IterationLog, Metrics};
use crate::plasticity::SynapseMatrix;

fn fmt(x: f64) -> String {
    format!("{x}")
}

pub const ITERATIONS_CSV_HEADER: &str = "iteration,state,action,reward,baseline,wall_time_s";

/// Renders the fixed-column iteration log CSV.
pub fn iterations_csv(logs: &[IterationLog]) -> String {
    let mut out = String::from(ITERATIONS_CSV_HEADER);
    out.push('\n');
    for log in logs {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            log.iteration,
            log.state,
            log.action,
            fmt(log.reward),
            fmt(log.baseline),
            fmt(log.wall_time_s)
        ));
    }
    out
}

/// One parsed row of the iteration CSV (the CSV carries no rate
/// vectors; use the NDJSON log for those).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsvIterationRow {
    pub iteration: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub baseline: f64,
    pub wall_time_s: f64,
}

pub fn parse_iterations_csv(text: &str) -> Result<Vec<CsvIterationRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ITERATIONS_CSV_HEADER => {}
        Some(h) => {
            return Err(Error::Parameter(format!(
                "unexpected iteration CSV header: {h}"
            )))
        }
        None => return Err(Error::Parameter("empty iteration CSV".into())),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parameter(format!(
                "iteration CSV row {}: expected 6 fields, got {}",
                k + 1,
                fields.len()
            )));
        }
        let parse_err =
            |what: &str| Error::Parameter(format!("iteration CSV row {}: bad {what}", k + 1));
        rows.push(CsvIterationRow {
            iteration: fields[0].parse().map_err(|_| parse_err("iteration"))?,
            state: fields[1].parse().map_err(|_| parse_err("state"))?,
            action: fields[2].parse().map_err(|_| parse_err("action"))?,
            reward: fields[3].parse().map_err(|_| parse_err("reward"))?,
            baseline: fields[4].parse().map_err(|_| parse_err("baseline"))?,
            wall_time_s: fields[5].parse().map_err(|_| parse_err("wall_time_s"))?,
        });
    }
    Ok(rows)
}

/// First record of the NDJSON run log: everything replay needs to
/// interpret the rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub version: String,
    pub seed: u64,
    pub n_iterations: usize,
    pub eval_every: usize,
    pub n_input: usize,
    pub n_output: usize,
    pub n_columns: usize,
    /// 0 means continuous weights.
    pub weight_levels: u32,
    pub w_min: f64,
    pub w_max: f64,
}

/// Final-weights record: integer levels in quantized mode, raw values in
/// continuous mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub levels: Option<Vec<Vec<u32>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub values: Option<Vec<Vec<f64>>>,
}

/// One line of the NDJSON run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(RunHeader),
    Iteration(IterationLog),
    Eval { iteration: usize, catch_fraction: f64 },
    FinalWeights(WeightsRecord),
}

fn weights_record(weights: &SynapseMatrix) -> Result<WeightsRecord> {
    let (n_in, n_out) = (weights.n_input(), weights.n_output());
    if weights.levels().is_some() {
        let levels = (0..n_in)
            .map(|i| (0..n_out).map(|j| weights.level_index(i, j)).collect())
            .collect::<Result<Vec<Vec<u32>>>>()?;
        Ok(WeightsRecord {
            levels: Some(levels),
            values: None,
        })
    } else {
        let values = (0..n_in)
            .map(|i| (0..n_out).map(|j| weights.value(i, j)).collect())
            .collect();
        Ok(WeightsRecord {
            levels: None,
            values: Some(values),
        })
    }
}

/// Renders the complete NDJSON run log: header, the initial evaluation
/// as an `iteration: 0` eval record, iteration records with later eval
/// records interleaved chronologically, and the final weights.
pub fn run_ndjson(
    header: &RunHeader,
    logs: &[IterationLog],
    metrics: &Metrics,
    weights: &SynapseMatrix,
) -> Result<String> {
    let mut records: Vec<LogRecord> = Vec::with_capacity(logs.len() + 8);
    records.push(LogRecord::Header(header.clone()));
    records.push(LogRecord::Eval {
        iteration: 0,
        catch_fraction: metrics.initial_catch_fraction,
    });
    let mut curve = metrics.catch_fraction_curve.iter().peekable();
    for log in logs {
        records.push(LogRecord::Iteration(log.clone()));
        if let Some(&&(at, fraction)) = curve.peek() {
            if at == log.iteration + 1 {
                records.push(LogRecord::Eval {
                    iteration: at,
                    catch_fraction: fraction,
                });
                curve.next();
            }
        }
    }
    records.push(LogRecord::FinalWeights(weights_record(weights)?));
    let mut out = String::new();
    for rec in &records {
        out.push_str(&serde_json::to_string(rec).map_err(|e| {
            Error::Parameter(format!("log record serialization failed: {e}"))
        })?);
        out.push('\n');
    }
    Ok(out)
}

/// Everything recovered from a parsed NDJSON run log.
#[derive(Clone, Debug)]
pub struct ReplayData {
    pub header: Option<RunHeader>,
    pub iterations: Vec<IterationLog>,
    /// (iteration, fraction); the `iteration: 0` record is the
    /// pre-training evaluation.
    pub evals: Vec<(usize, f64)>,
    pub weights: Option<SynapseMatrix>,
}

/// Parses an NDJSON run log. A malformed line fails with a message
/// naming it and the last record that parsed.
pub fn parse_run_ndjson(text: &str) -> Result<ReplayData> {
    let mut data = ReplayData {
        header: None,
        iterations: Vec::new(),
        evals: Vec::new(),
        weights: None,
    };
    let mut parsed = 0usize;
    for (k, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: LogRecord = serde_json::from_str(line).map_err(|e| {
            Error::Parameter(format!(
                "run log line {}: {e}; last valid record is line {parsed}",
                k + 1
            ))
        })?;
        parsed = k + 1;
        match record {
            LogRecord::Header(h) => data.header = Some(h),
            LogRecord::Iteration(log) => data.iterations.push(log),
            LogRecord::Eval {
                iteration,
                catch_fraction,
            } => data.evals.push((iteration, catch_fraction)),
            LogRecord::FinalWeights(rec) => {
                let header = data.header.as_ref().ok_or_else(|| {
                    Error::Parameter(format!(
                        "run log line {}: weights record before header",
                        k + 1
                    ))
                })?;
                data.weights = Some(reconstruct_weights(&rec, header)?);
            }
        }
    }
    if parsed == 0 {
        return Err(Error::Parameter("empty run log".into()));
    }
    Ok(data)
}

fn reconstruct_weights(rec: &WeightsRecord, header: &RunHeader) -> Result<SynapseMatrix> {
    match (&rec.levels, &rec.values, header.weight_levels) {
        (Some(levels), _, n) if n >= 2 => {
            SynapseMatrix::from_level_indices(levels, header.w_min, header.w_max, n)
        }
        (_, Some(values), 0) => {
            let n_in = values.len();
            let n_out = values.first().map_or(0, Vec::len);
            let mut m = SynapseMatrix::continuous(n_in, n_out, header.w_min, header.w_max)?;
            for (i, row) in values.iter().enumerate() {
                if row.len() != n_out {
                    return Err(Error::Parameter(format!(
                        "weights row {i} has {} entries, expected {n_out}",
                        row.len()
                    )));
                }
                for (j, &v) in row.iter().enumerate() {
                    m.set(i, j, v)?;
                }
            }
            Ok(m)
        }
        _ => Err(Error::Parameter(
            "weights record does not match the header's weight mode".into(),
        )),
    }
}

/// Renders a weight snapshot: a header line `n_input n_output levels`
/// followed by one row per input unit of space-separated integer levels
/// (levels = 0 marks continuous mode, with raw values instead).
pub fn weights_text(weights: &SynapseMatrix) -> Result<String> {
    let (n_in, n_out) = (weights.n_input(), weights.n_output());
    let mut out = format!("{n_in} {n_out} {}\n", weights.levels().unwrap_or(0));
    for i in 0..n_in {
        let row: Vec<String> = match weights.levels() {
            Some(_) => (0..n_out)
                .map(|j| weights.level_index(i, j).map(|l| l.to_string()))
                .collect::<Result<_>>()?,
            None => (0..n_out).map(|j| fmt(weights.value(i, j))).collect(),
        };
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Parses a weight snapshot back into a matrix. The text format does not
/// carry the weight bounds, so the caller supplies them (from the run's
/// manifest or the NDJSON header).
pub fn parse_weights_text(text: &str, w_min: f64, w_max: f64) -> Result<SynapseMatrix> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parameter("empty weight snapshot".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Parameter(format!(
            "weight snapshot header must be `n_input n_output levels`, got: {header}"
        )));
    }
    let bad_header = |what: &str| Error::Parameter(format!("weight snapshot header: bad {what}"));
    let n_in: usize = parts[0].parse().map_err(|_| bad_header("n_input"))?;
    let n_out: usize = parts[1].parse().map_err(|_| bad_header("n_output"))?;
    let levels: u32 = parts[2].parse().map_err(|_| bad_header("levels"))?;

    let mut rows_text: Vec<&str> = lines.collect();
    while rows_text.last() == Some(&"") {
        rows_text.pop();
    }
    if rows_text.len() != n_in {
        return Err(Error::Parameter(format!(
            "weight snapshot has {} rows, header says {n_in}",
            rows_text.len()
        )));
    }
    if levels >= 2 {
        let level_rows = rows_text
            .iter()
            .enumerate()
            .map(|(i, line)| {
                line.split_whitespace()
                    .map(|tok| {
                        tok.parse::<u32>().map_err(|_| {
                            Error::Parameter(format!("weight snapshot row {i}: bad level {tok}"))
                        })
                    })
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        SynapseMatrix::from_level_indices(&level_rows, w_min, w_max, levels)
    } else {
        let mut m = SynapseMatrix::continuous(n_in, n_out, w_min, w_max)?;
        for (i, line) in rows_text.iter().enumerate() {
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| {
                        Error::Parameter(format!("weight snapshot row {i}: bad value {tok}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != n_out {
                return Err(Error::Parameter(format!(
                    "weight snapshot row {i} has {} entries, expected {n_out}",
                    values.len()
                )));
            }
            for (j, &v) in values.iter().enumerate() {
                m.set(i, j, v)?;
            }
        }
        Ok(m)
    }
}

/// Renders an `iteration,<name>` curve CSV.
pub fn curve_csv(value_name: &str, rows: &[(usize, f64)]) -> String {
    let mut out = format!("iteration,{value_name}\n");
    for &(iteration, value) in rows {
        out.push_str(&format!("{iteration},{}\n", fmt(value)));
    }
    out
}

/// Renders the key-value metrics summary.
pub fn summary_text(metrics: &Metrics) -> String {
    let final_catch = metrics
        .catch_fraction_curve
        .last()
        .map_or(metrics.initial_catch_fraction, |&(_, f)| f);
    let opt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), fmt);
    format!(
        "initial_catch_fraction={}\nfinal_catch_fraction={}\ndiagonal_dominance={}\n\
         weight_excitability_correlation={}\nweight_excitability_p_value={}\n",
        fmt(metrics.initial_catch_fraction),
        fmt(final_catch),
        fmt(metrics.diagonal_dominance),
        opt(metrics.weight_excitability_correlation),
        opt(metrics.weight_excitability_p_value),
    )
}

/// Trailing moving average of the rewards over `window` iterations; one
/// row per iteration once a full window exists, labeled by the 0-based
/// iteration index.
pub fn reward_moving_average(rewards: &[f64], window: usize) -> Result<Vec<(usize, f64)>> {
    if window == 0 {
        return Err(Error::Parameter("moving-average window must be positive".into()));
    }
    let mut rows = Vec::new();
    if rewards.len() < window {
        return Ok(rows);
    }
    let mut sum: f64 = rewards[..window].iter().sum();
    rows.push((window - 1, sum / window as f64));
    for i in window..rewards.len() {
        sum += rewards[i] - rewards[i - window];
        rows.push((i, sum / window as f64));
    }
    Ok(rows)
}

/// Renders the weight heat-map grid: one row per synapse. The level
/// column holds the integer level in quantized mode and the raw weight
/// in continuous mode.
pub fn heatmap_csv(weights: &SynapseMatrix) -> Result<String> {
    let mut out = String::from("row,col,level\n");
    for i in 0..weights.n_input() {
        for j in 0..weights.n_output() {
            let cell = match weights.levels() {
                Some(_) => weights.level_index(i, j)?.to_string(),
                None => fmt(weights.value(i, j)),
            };
            out.push_str(&format!("{i},{j},{cell}\n"));
        }
    }
    Ok(out)
}

/// Renders the cross-seed aggregate of catch-fraction curves: per
/// iteration, the median and quartiles over seeds. All curves must share
/// the same iteration grid.
pub fn aggregate_catch_csv(curves: &[Vec<(usize, f64)>]) -> Result<String> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Parameter("aggregate of zero curves".into()))?;
    for (k, curve) in curves.iter().enumerate() {
        let grid_matches = curve.len() == first.len()
            && curve.iter().zip(first).all(|(&(a, _), &(b, _))| a == b);
        if !grid_matches {
            return Err(Error::Parameter(format!(
                "curve {k} has a different iteration grid"
            )));
        }
    }
    let mut out = String::from("iteration,median,q25,q75\n");
    for point in 0..first.len() {
        let values: Vec<f64> = curves.iter().map(|c| c[point].1).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            first[point].0,
            fmt(crate::stats::quantile(&values, 0.5)?),
            fmt(crate::stats::quantile(&values, 0.25)?),
            fmt(crate::stats::quantile(&values, 0.75)?),
        ));
    }
    Ok(out)
}

pub const BENCH_REPORT_CSV_HEADER: &str = "mode,n_input,n_output,median_s,p10_s,p90_s,n_samples";
pub const BENCH_SAMPLES_CSV_HEADER: &str = "mode,n_input,n_output,iteration,seconds";

/// Renders the benchmark summary table.
pub fn bench_report_csv(report: &BenchReport) -> String {
    let mut out = String::from(BENCH_REPORT_CSV_HEADER);
    out.push('\n');
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.mode,
            e.n_input,
            e.n_output,
            fmt(e.median_s),
            fmt(e.p10_s),
            fmt(e.p90_s),
            e.n_samples
        ));
    }
    out
}

/// Renders every raw benchmark sample, so any reported quantile can be
/// recomputed from the dump.
pub fn bench_samples_csv(report: &BenchReport) -> String {
    let mut out = String::from(BENCH_SAMPLES_CSV_HEADER);
    out.push('\n');
    for e in &report.entries {
        for (k, &s) in e.samples.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{k},{}\n",
                e.mode,
                e.n_input,
                e.n_output,
                fmt(s)
            ));
        }
    }
    out
}

/// One parsed raw-sample row: (mode, n_input, n_output, iteration,
/// seconds).
pub fn parse_bench_samples_csv(text: &str) -> Result<Vec<(String, usize, usize, usize, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == BENCH_SAMPLES_CSV_HEADER => {}
        _ => return Err(Error::Parameter("bad bench samples CSV header".into())),
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            let bad =
                |what: &str| Error::Parameter(format!("bench samples row {}: bad {what}", k + 1));
            if fields.len() != 5 {
                return Err(bad("field count"));
            }
            Ok((
                fields[0].to_string(),
                fields[1].parse().map_err(|_| bad("n_input"))?,
                fields[2].parse().map_err(|_| bad("n_output"))?,
                fields[3].parse().map_err(|_| bad("iteration"))?,
                fields[4].parse().map_err(|_| bad("seconds"))?,
            ))
        })
        .collect()
}
