//! The closed loop: encode the ball column, run a network trial, read an
//! action from the output rates, score it, and apply the three-factor
//! update. Also the greedy evaluation protocol and the summary metrics.

use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, StateSchedule};
use crate::error::{Error, Result};
use crate::plasticity::{
    accumulate_traces, digitize, rstdp_update, update_baseline, Baseline, SynapseMatrix,
};
use crate::pong::{compute_reward, evaluate_catch_fraction};
use crate::snn::{
    apply_fixed_pattern_noise, firing_rates, poisson_encode, run_trial, NoiseConfig, Population,
    SpikeTrain,
};

/// Everything recorded about one training iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Ball column presented to the network.
    pub state: usize,
    /// Column the network aimed the paddle at.
    pub action: usize,
    pub reward: f64,
    /// Baseline value used by this iteration's update (read before the
    /// baseline's own EMA step).
    pub baseline: f64,
    /// Output firing rates of the trial (Hz).
    pub rate_vector: Vec<f64>,
    /// L2 norm of the weight change applied this iteration.
    pub weight_delta_norm: f64,
    pub wall_time_s: f64,
}

/// Post-run summary quantities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Greedy catch fraction before any training.
    pub initial_catch_fraction: f64,
    /// (iteration, fraction) after every `eval_every` iterations.
    pub catch_fraction_curve: Vec<(usize, f64)>,
    /// (iteration, mean reward) over each successive `eval_every`-long
    /// window of training iterations.
    pub mean_reward_curve: Vec<(usize, f64)>,
    /// Fraction of input rows whose diagonal weight is the strict row
    /// maximum.
    pub diagonal_dominance: f64,
    /// Spearman correlation between per-neuron excitability gap
    /// (v_thresh - v_rest) and learned diagonal weight. Absent when the
    /// population is homogeneous (zero variance).
    pub weight_excitability_correlation: Option<f64>,
    /// One-sided permutation-test p-value for that correlation.
    pub weight_excitability_p_value: Option<f64>,
}

/// Result of a complete training run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub weights: SynapseMatrix,
    pub logs: Vec<IterationLog>,
    pub metrics: Metrics,
    /// The noised population the run trained on, for post-hoc analysis.
    pub population: Population,
}

/// Independent sub-seeds drawn from the experiment seed in a fixed
/// order, so that consumers cannot perturb each other's streams (e.g.
/// changing the evaluation cadence must not change training).
pub struct SeedPlan {
    pub fixed_pattern: u64,
    pub weights: u64,
    pub train: u64,
    pub eval: u64,
    pub analysis: u64,
}

impl SeedPlan {
    pub fn derive(cfg: &ExperimentConfig) -> SeedPlan {
        let mut master = StdRng::seed_from_u64(cfg.experiment.seed);
        let derived_fp: u64 = master.random();
        let weights = master.random();
        let train = master.random();
        let eval = master.random();
        let analysis = master.random();
        SeedPlan {
            fixed_pattern: cfg.noise.seed.unwrap_or(derived_fp),
            weights,
            train,
            eval,
            analysis,
        }
    }
}

// Every evaluation reuses the same frozen stimulus draws: differences
// between two points of the catch curve then reflect weight changes
// only, and a run with learning disabled produces an exactly flat curve.

/// The population the run trains on: nominal parameters perturbed once
/// by fixed-pattern noise under the run's seed plan.
pub fn build_population(cfg: &ExperimentConfig) -> Result<Population> {
    let seeds = SeedPlan::derive(cfg);
    let params = apply_fixed_pattern_noise(
        &cfg.snn.neuron_params(),
        cfg.snn.n_output,
        cfg.noise.fixed_pattern_sigma,
        seeds.fixed_pattern,
    )?;
    Population::from_params(params)
}

/// The weights a run starts from: uniform random over the lowest
/// quartile of the weight range, drawn from the run's seed plan. Starting
/// low leaves room to potentiate while still breaking symmetry.
pub fn initial_weights(cfg: &ExperimentConfig) -> Result<SynapseMatrix> {
    let seeds = SeedPlan::derive(cfg);
    let p = &cfg.plasticity;
    let (n_in, n_out) = (cfg.snn.n_input, cfg.snn.n_output);
    let mut rng = StdRng::seed_from_u64(seeds.weights);
    let mut weights = match p.levels() {
        Some(levels) => SynapseMatrix::quantized(n_in, n_out, p.w_min, p.w_max, levels)?,
        None => SynapseMatrix::continuous(n_in, n_out, p.w_min, p.w_max)?,
    };
    let span = p.w_max - p.w_min;
    for i in 0..n_in {
        for j in 0..n_out {
            let w = match p.levels() {
                Some(levels) => {
                    let step = span / (levels - 1) as f64;
                    let top = (levels - 1) / 4;
                    p.w_min + rng.random_range(0..=top) as f64 * step
                }
                None => rng.random_range(p.w_min..p.w_min + span / 4.0),
            };
            weights.set(i, j, w)?;
        }
    }
    Ok(weights)
}

/// Index of the largest value; exact ties are broken uniformly at random
/// with the supplied RNG (no draw happens when the maximum is unique).
fn argmax_random_ties(values: &[f64], rng: &mut StdRng) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (idx, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            ties.clear();
            ties.push(idx);
        } else if v == best {
            ties.push(idx);
        }
    }
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

/// Index of the largest value, lowest index winning ties. Used by the
/// greedy evaluation, which must be deterministic.
fn argmax_first(values: &[f64]) -> usize {
    let mut best_idx = 0;
    for idx in 1..values.len() {
        if values[idx] > values[best_idx] {
            best_idx = idx;
        }
    }
    best_idx
}

/// One noisy trial of one state with everything the update rule needs.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub input: SpikeTrain,
    pub output: SpikeTrain,
    pub rates: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// Encodes `state`, runs one noisy trial, picks the action as the
/// rate argmax (random tie-break) and scores it against the state.
/// Consumes per-trial sub-seeds and the tie-break from `rng`.
pub fn forward_pass(
    weights: &SynapseMatrix,
    population: &mut Population,
    state: usize,
    cfg: &ExperimentConfig,
    rng: &mut StdRng,
) -> Result<ForwardPass> {
    let encode_seed: u64 = rng.random();
    let trial_seed: u64 = rng.random();
    let input = poisson_encode(
        state,
        cfg.snn.n_input,
        cfg.snn.rate_hi,
        cfg.snn.rate_lo,
        cfg.snn.trial_duration,
        encode_seed,
    )?;
    let (output, input_echo) = run_trial(
        weights,
        population,
        &input,
        &cfg.snn.trial_params(),
        &cfg.noise,
        trial_seed,
    )?;
    let rates = firing_rates(&output, cfg.snn.n_output, cfg.snn.trial_duration)?;
    let action = argmax_random_ties(&rates, rng);
    let reward = compute_reward(state, action, &cfg.env.reward_schedule())?;
    Ok(ForwardPass {
        input: input_echo,
        output,
        rates,
        action,
        reward,
    })
}

/// The learning half of an iteration: accumulate and digitize the
/// eligibility, read the pre-update baseline, update the baseline, and
/// apply the three-factor rule. Returns the new weights, new baseline,
/// the baseline value that was used, and the L2 norm of the weight
/// change.
pub fn plasticity_step(
    weights: &SynapseMatrix,
    baseline: &Baseline,
    state: usize,
    fwd: &ForwardPass,
    cfg: &ExperimentConfig,
) -> Result<(SynapseMatrix, Baseline, f64, f64)> {
    let traces = accumulate_traces(
        &fwd.input,
        &fwd.output,
        &cfg.plasticity.kernel(),
        cfg.snn.n_input,
        cfg.snn.n_output,
        &cfg.plasticity.trace_config(),
    )?;
    let eligibility = digitize(&traces);
    let rcfg = cfg.plasticity.rstdp_config();
    let baseline_value = baseline.value(state)?;
    let next_baseline = update_baseline(baseline, fwd.reward, state, &rcfg)?;
    let next_weights = rstdp_update(weights, &eligibility, fwd.reward, baseline_value, &rcfg)?;
    let delta_norm = next_weights
        .values()
        .iter()
        .zip(weights.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok((next_weights, next_baseline, baseline_value, delta_norm))
}

/// One full training iteration on `state`. Returns the updated weights
/// and baseline along with the iteration's log record.
pub fn run_iteration(
    weights: &SynapseMatrix,
    population: &mut Population,
    baseline: &Baseline,
    state: usize,
    iteration: usize,
    cfg: &ExperimentConfig,
    rng: &mut StdRng,
) -> Result<(SynapseMatrix, Baseline, IterationLog)> {
    let t0 = Instant::now();
    let fwd = forward_pass(weights, population, state, cfg, rng)?;
    let (next_weights, next_baseline, baseline_value, delta_norm) =
        plasticity_step(weights, baseline, state, &fwd, cfg)?;
    let wall_time_s = t0.elapsed().as_secs_f64();
    let log = IterationLog {
        iteration,
        state,
        action: fwd.action,
        reward: fwd.reward,
        baseline: baseline_value,
        rate_vector: fwd.rates,
        weight_delta_norm: delta_norm,
        wall_time_s,
    };
    Ok((next_weights, next_baseline, log))
}

/// The deterministic policy the current weights encode: for each column,
/// the rate-argmax action over `eval_repeats` noise-free trials (lowest
/// index on ties). Trial encoding seeds come from `rng`.
pub fn greedy_policy(
    weights: &SynapseMatrix,
    population: &mut Population,
    cfg: &ExperimentConfig,
    rng: &mut StdRng,
) -> Result<Vec<usize>> {
    let quiet = NoiseConfig {
        fixed_pattern_sigma: cfg.noise.fixed_pattern_sigma,
        trial_noise_current_sigma: 0.0,
        seed: cfg.noise.seed,
    };
    let n_out = cfg.snn.n_output;
    let mut policy = Vec::with_capacity(cfg.env.n_columns);
    for state in 0..cfg.env.n_columns {
        let mut mean_rates = vec![0.0; n_out];
        for _ in 0..cfg.experiment.eval_repeats {
            let encode_seed: u64 = rng.random();
            let input = poisson_encode(
                state,
                cfg.snn.n_input,
                cfg.snn.rate_hi,
                cfg.snn.rate_lo,
                cfg.snn.trial_duration,
                encode_seed,
            )?;
            let (output, _) = run_trial(
                weights,
                population,
                &input,
                &cfg.snn.trial_params(),
                &quiet,
                encode_seed,
            )?;
            let rates = firing_rates(&output, n_out, cfg.snn.trial_duration)?;
            for (acc, r) in mean_rates.iter_mut().zip(&rates) {
                *acc += r / cfg.experiment.eval_repeats as f64;
            }
        }
        policy.push(argmax_first(&mean_rates));
    }
    Ok(policy)
}

fn evaluate_greedy(
    weights: &SynapseMatrix,
    population: &mut Population,
    cfg: &ExperimentConfig,
    eval_seed: u64,
) -> Result<f64> {
    let mut rng = StdRng::seed_from_u64(eval_seed);
    let policy = greedy_policy(weights, population, cfg, &mut rng)?;
    evaluate_catch_fraction(&policy, &cfg.env.field_config())
}

/// Fraction of rows whose diagonal entry is the strict maximum of the
/// row. Ties count as failures: a learned winner must stand alone.
pub fn diagonal_dominance(weights: &SynapseMatrix) -> Result<f64> {
    let n = weights.n_input();
    if weights.n_output() != n {
        return Err(Error::Parameter(format!(
            "diagonal dominance needs a square matrix, got {} x {}",
            n,
            weights.n_output()
        )));
    }
    let mut dominant = 0;
    for i in 0..n {
        let diag = weights.value(i, i);
        if (0..n).all(|j| j == i || weights.value(i, j) < diag) {
            dominant += 1;
        }
    }
    Ok(dominant as f64 / n as f64)
}

/// Spearman rank correlation between each neuron's excitability gap
/// (v_thresh - v_rest; smaller = more excitable) and its learned
/// diagonal weight. A positive value means the rule compensated: harder
/// neurons ended up with stronger synapses.
pub fn weight_excitability_correlation(
    weights: &SynapseMatrix,
    population: &Population,
) -> Result<f64> {
    let (gaps, diags) = excitability_pairs(weights, population)?;
    crate::stats::spearman(&gaps, &diags)
}

/// Same correlation plus a one-sided (greater) permutation test.
/// Returns (rho, p).
pub fn weight_excitability_significance(
    weights: &SynapseMatrix,
    population: &Population,
    n_shuffles: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (gaps, diags) = excitability_pairs(weights, population)?;
    crate::stats::spearman_permutation_test(&gaps, &diags, n_shuffles, seed)
}

fn excitability_pairs(
    weights: &SynapseMatrix,
    population: &Population,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = weights.n_input();
    if weights.n_output() != n || population.len() != n {
        return Err(Error::Parameter(format!(
            "weights {} x {} and population of {} must agree and be square",
            n,
            weights.n_output(),
            population.len()
        )));
    }
    let gaps = population
        .params()
        .iter()
        .map(|p| p.v_thresh - p.v_rest)
        .collect();
    let diags = (0..n).map(|j| weights.value(j, j)).collect();
    Ok((gaps, diags))
}

/// Runs the full closed-loop experiment described by `cfg`:
/// fixed-pattern noise, low random weights, `n_iterations` of training
/// with greedy evaluations every `eval_every` iterations, then the
/// summary metrics. Deterministic given the config (wall times aside).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let seeds = SeedPlan::derive(cfg);
    let mut population = build_population(cfg)?;
    let mut weights = initial_weights(cfg)?;
    let mut baseline = Baseline::new(cfg.plasticity.baseline_mode, cfg.env.n_columns);
    let mut train_rng = StdRng::seed_from_u64(seeds.train);

    let n = cfg.experiment.n_iterations;
    let every = cfg.experiment.eval_every;
    let initial_catch_fraction = evaluate_greedy(&weights, &mut population, cfg, seeds.eval)?;
    let mut logs = Vec::with_capacity(n);
    let mut catch_curve = Vec::new();
    for i in 0..n {
        let state = match cfg.experiment.state_schedule {
            StateSchedule::Cyclic => i % cfg.env.n_columns,
            StateSchedule::UniformRandom => train_rng.random_range(0..cfg.env.n_columns),
        };
        let (w, b, log) =
            run_iteration(&weights, &mut population, &baseline, state, i, cfg, &mut train_rng)?;
        weights = w;
        baseline = b;
        logs.push(log);
        if (i + 1) % every == 0 {
            let fraction = evaluate_greedy(&weights, &mut population, cfg, seeds.eval)?;
            catch_curve.push((i + 1, fraction));
        }
    }

    let rewards: Vec<f64> = logs.iter().map(|l| l.reward).collect();
    let mean_reward_curve = mean_reward_windows(&rewards, every);
    let dominance = diagonal_dominance(&weights)?;
    let (rho, p) =
        match weight_excitability_significance(&weights, &population, 1000, seeds.analysis) {
            Ok((rho, p)) => (Some(rho), Some(p)),
            Err(Error::UndefinedCorrelation) => (None, None),
            Err(e) => return Err(e),
        };

    Ok(RunOutput {
        weights,
        logs,
        metrics: Metrics {
            initial_catch_fraction,
            catch_fraction_curve: catch_curve,
            mean_reward_curve,
            diagonal_dominance: dominance,
            weight_excitability_correlation: rho,
            weight_excitability_p_value: p,
        },
        population,
    })
}

/// Mean reward over each successive full window of `every` iterations,
/// labeled by the window's final iteration count. Shared by the run and
/// by replay so both produce identical curves.
pub fn mean_reward_windows(rewards: &[f64], every: usize) -> Vec<(usize, f64)> {
    if every == 0 {
        return Vec::new();
    }
    (0..rewards.len() / every)
        .map(|k| {
            let window = &rewards[k * every..(k + 1) * every];
            let mean = window.iter().sum::<f64>() / every as f64;
            ((k + 1) * every, mean)
        })
        .collect()
}

/// Runs one independent experiment per seed. `jobs` caps the worker
/// threads (`None` uses the global default). Results are returned in
/// seed order and are identical whatever the parallelism, because each
/// run is self-seeded and shares nothing.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    jobs: Option<usize>,
) -> Result<Vec<RunOutput>> {
    if seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one seed".into()));
    }
    let run_one = |&seed: &u64| -> Result<RunOutput> {
        let mut seeded = cfg.clone();
        seeded.experiment.seed = seed;
        run_experiment(&seeded)
    };
    match jobs {
        Some(n_threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n_threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| seeds.par_iter().map(run_one).collect())
        }
        None => seeds.par_iter().map(run_one).collect(),
    }
}
