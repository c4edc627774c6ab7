//! Wall-time measurement of the closed-loop iteration across network
//! sizes, with and without the plasticity update. Both modes share the
//! forward path verbatim, so their difference isolates the cost of
//! learning.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{build_population, forward_pass, initial_weights, plasticity_step};
use crate::plasticity::Baseline;
use crate::stats::quantile;

/// What one benchmark iteration does after its forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    /// Forward pass only; weights stay fixed.
    NoPlasticity,
    /// Forward pass plus the full three-factor update.
    WithPlasticity,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchMode::NoPlasticity => "no-plasticity",
            BenchMode::WithPlasticity => "with-plasticity",
        })
    }
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-plasticity" => Ok(BenchMode::NoPlasticity),
            "with-plasticity" => Ok(BenchMode::WithPlasticity),
            other => Err(Error::Parameter(format!(
                "unknown bench mode {other:?}; expected no-plasticity or with-plasticity"
            ))),
        }
    }
}

/// The `[bench]` section: how many iterations to time and over which
/// network shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    /// Iterations per (size, mode) pair, warmup included.
    pub n_iterations: usize,
    /// Leading iterations that run unmeasured, so cache and allocator
    /// effects settle before sampling starts.
    pub warmup: usize,
    /// (n_input, n_output) shapes to measure.
    pub sizes: Vec<(usize, usize)>,
    pub modes: Vec<BenchMode>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_iterations: 200,
            warmup: 20,
            sizes: vec![(32, 32), (64, 64)],
            modes: vec![BenchMode::NoPlasticity, BenchMode::WithPlasticity],
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup >= self.n_iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must leave at least one measured iteration of {}",
                self.warmup, self.n_iterations
            )));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config("bench sizes must be non-empty".into()));
        }
        for &(n_in, n_out) in &self.sizes {
            if n_in == 0 || n_out == 0 {
                return Err(Error::Config(format!(
                    "bench sizes must be positive, got {n_in}x{n_out}"
                )));
            }
        }
        if self.modes.is_empty() {
            return Err(Error::Config("bench modes must be non-empty".into()));
        }
        let repeated = (1..self.modes.len()).any(|k| self.modes[..k].contains(&self.modes[k]));
        if repeated {
            return Err(Error::Config("bench modes must not repeat".into()));
        }
        Ok(())
    }
}

/// Measured timings for one (mode, shape) pair.
#[derive(Clone, Debug)]
pub struct BenchEntry {
    pub mode: BenchMode,
    pub n_input: usize,
    pub n_output: usize,
    pub median_s: f64,
    pub p10_s: f64,
    pub p90_s: f64,
    pub n_samples: usize,
    /// Per-iteration wall times in measurement order.
    pub samples: Vec<f64>,
}

/// All benchmark results plus the clock quality they were taken with.
#[derive(Clone, Debug)]
pub struct BenchReport {
    /// Size-major, mode-minor, in configuration order.
    pub entries: Vec<BenchEntry>,
    /// Smallest positive interval the monotonic clock resolved while
    /// probing.
    pub timer_resolution_s: f64,
    /// One message per entry whose median is too close to the timer
    /// resolution to trust.
    pub warnings: Vec<String>,
}

/// Smallest positive interval the monotonic clock reports, estimated by
/// spinning until `Instant::now` advances.
fn timer_resolution_s() -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..64 {
        let t0 = Instant::now();
        let mut elapsed = t0.elapsed();
        while elapsed.is_zero() {
            elapsed = t0.elapsed();
        }
        best = best.min(elapsed.as_secs_f64());
    }
    best
}

/// A copy of `cfg` resized to one benchmark shape. Only the sections the
/// iteration path reads are revalidated; the whole-experiment check is
/// skipped on purpose, since it pins the network square to the game
/// field while benchmarks also measure rectangular shapes.
fn scaled_config(
    cfg: &ExperimentConfig,
    n_input: usize,
    n_output: usize,
) -> Result<ExperimentConfig> {
    let mut scaled = cfg.clone();
    scaled.snn.n_input = n_input;
    scaled.snn.n_output = n_output;
    scaled.env.n_columns = n_input;
    scaled.snn.validate()?;
    scaled.plasticity.validate()?;
    scaled.noise.validate()?;
    Ok(scaled)
}

fn bench_one(
    cfg: &ExperimentConfig,
    n_input: usize,
    n_output: usize,
    mode: BenchMode,
) -> Result<BenchEntry> {
    let scaled = scaled_config(cfg, n_input, n_output)?;
    let mut population = build_population(&scaled)?;
    let mut weights = initial_weights(&scaled)?;
    let mut baseline = Baseline::new(scaled.plasticity.baseline_mode, n_input);
    let mut rng = StdRng::seed_from_u64(scaled.experiment.seed);
    let measured = cfg.bench.n_iterations - cfg.bench.warmup;
    let mut samples = Vec::with_capacity(measured);
    for k in 0..cfg.bench.n_iterations {
        let state = rng.random_range(0..n_input);
        let t0 = Instant::now();
        let fwd = forward_pass(&weights, &mut population, state, &scaled, &mut rng)?;
        if mode == BenchMode::WithPlasticity {
            let (w, b, _, _) = plasticity_step(&weights, &baseline, state, &fwd, &scaled)?;
            weights = w;
            baseline = b;
        }
        let elapsed = t0.elapsed().as_secs_f64();
        if k >= cfg.bench.warmup {
            samples.push(elapsed);
        }
    }
    Ok(BenchEntry {
        mode,
        n_input,
        n_output,
        median_s: quantile(&samples, 0.5)?,
        p10_s: quantile(&samples, 0.1)?,
        p90_s: quantile(&samples, 0.9)?,
        n_samples: samples.len(),
        samples,
    })
}

/// Times `cfg.bench.n_iterations` closed-loop iterations per (size,
/// mode) pair on the monotonic clock, discarding the warmup. An entry
/// whose median lands within ten timer resolutions gets a warning in the
/// report.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.bench.validate()?;
    let resolution = timer_resolution_s();
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for &(n_input, n_output) in &cfg.bench.sizes {
        for &mode in &cfg.bench.modes {
            let entry = bench_one(cfg, n_input, n_output, mode)?;
            if entry.median_s < 10.0 * resolution {
                warnings.push(format!(
                    "{mode} {n_input}x{n_output}: median {:.3e} s is within 10x of the timer \
                     resolution {resolution:.3e} s; increase the trial duration or sizes",
                    entry.median_s
                ));
            }
            entries.push(entry);
        }
    }
    Ok(BenchReport {
        entries,
        timer_resolution_s: resolution,
        warnings,
    })
}
