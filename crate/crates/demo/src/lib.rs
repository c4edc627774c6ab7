//! Browser build of the experiment: one simulation object exported
//! through wasm-bindgen and driven by the static page in `www/`.
//!
//! The object owns the full training state (weights, population,
//! baseline, RNG) and exposes three operations: advance training by a
//! chunk of iterations, play one rally under the current greedy policy,
//! and read the weight matrix for a heatmap. Everything is synchronous;
//! the page keeps the UI responsive by training in small chunks.
//!
//! A simulation seeded with `s` follows the exact training trajectory
//! of a library run with `experiment.seed = s`, because both draw from
//! the same seed plan and consume the training stream in the same
//! order. The tests below pin that equivalence.
//!
//! The crate also builds natively (the cdylib target is only useful for
//! wasm, but the rlib carries the tests), so `cargo test` covers it
//! without a browser. See `www/README.md` for the wasm build.

use neuropong_core::config::{ExperimentConfig, StateSchedule};
use neuropong_core::experiment::{
    build_population, diagonal_dominance, forward_pass, greedy_policy, initial_weights,
    plasticity_step, SeedPlan,
};
use neuropong_core::plasticity::{Baseline, SynapseMatrix};
use neuropong_core::pong::{evaluate_catch_fraction, play_episode};
use neuropong_core::snn::Population;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[cfg(target_arch = "wasm32")]
use wasm_bindgen::prelude::*;

/// Board sizes the page may ask for. The lower bound is the smallest
/// legal field; the upper bound keeps a browser training chunk fast.
const MIN_COLUMNS: u32 = 2;
const MAX_COLUMNS: u32 = 32;

/// One interactive training session: a board of `n` columns, a 1-of-n
/// network learning to aim the paddle, and the RNG streams that make
/// the whole session a pure function of its seed.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
pub struct DemoSim {
    cfg: ExperimentConfig,
    weights: SynapseMatrix,
    population: Population,
    baseline: Baseline,
    train_rng: StdRng,
    eval_seed: u64,
    iteration: u32,
    last_rally_caught: bool,
}

// Internal invariant: `cfg` is validated at construction and never
// mutated, so the core calls below cannot fail and the expects are
// unreachable.
#[cfg_attr(target_arch = "wasm32", wasm_bindgen)]
impl DemoSim {
    /// A fresh session on an `n_columns`-wide board (clamped to
    /// [2, 32]). Same seed, same session, every time.
    #[cfg_attr(target_arch = "wasm32", wasm_bindgen(constructor))]
    pub fn new(n_columns: u32, seed: u32) -> DemoSim {
        let n = n_columns.clamp(MIN_COLUMNS, MAX_COLUMNS) as usize;
        let mut cfg = ExperimentConfig::default();
        cfg.snn.n_input = n;
        cfg.snn.n_output = n;
        cfg.env.n_columns = n;
        cfg.experiment.seed = seed as u64;
        cfg.validate().expect("sized default config is valid");
        let seeds = SeedPlan::derive(&cfg);
        DemoSim {
            weights: initial_weights(&cfg).expect("initial weights"),
            population: build_population(&cfg).expect("population"),
            baseline: Baseline::new(cfg.plasticity.baseline_mode, n),
            train_rng: StdRng::seed_from_u64(seeds.train),
            eval_seed: seeds.eval,
            iteration: 0,
            last_rally_caught: false,
            cfg,
        }
    }

    /// Runs `n` training iterations and returns their mean reward.
    pub fn train(&mut self, n: u32) -> f64 {
        let mut total = 0.0;
        for _ in 0..n {
            let state = match self.cfg.experiment.state_schedule {
                StateSchedule::Cyclic => self.iteration as usize % self.cfg.env.n_columns,
                StateSchedule::UniformRandom => {
                    use rand::Rng;
                    self.train_rng.random_range(0..self.cfg.env.n_columns)
                }
            };
            let fwd = forward_pass(
                &self.weights,
                &mut self.population,
                state,
                &self.cfg,
                &mut self.train_rng,
            )
            .expect("forward pass");
            let (w, b, _, _) = plasticity_step(&self.weights, &self.baseline, state, &fwd, &self.cfg)
                .expect("plasticity step");
            self.weights = w;
            self.baseline = b;
            self.iteration += 1;
            total += fwd.reward;
        }
        if n == 0 {
            0.0
        } else {
            total / n as f64
        }
    }

    /// Plays one rally from `start_column` under the current greedy
    /// policy and returns the trajectory as flat (ball_x, ball_y,
    /// paddle_x) triples, launch state first, paddle-row state last.
    pub fn play_rally(&mut self, start_column: u32) -> Vec<f64> {
        let start = (start_column as usize).min(self.cfg.env.n_columns - 1);
        let policy = self.greedy();
        let field = self.cfg.env.field_config();
        let (states, caught) = play_episode(&policy, &field, start).expect("rally");
        self.last_rally_caught = caught;
        let mut flat = Vec::with_capacity(states.len() * 3);
        for s in &states {
            flat.push(s.ball_x);
            flat.push(s.ball_y);
            flat.push(s.paddle_x);
        }
        flat
    }

    /// Whether the most recent `play_rally` ended in a catch.
    pub fn last_rally_caught(&self) -> bool {
        self.last_rally_caught
    }

    /// The weight matrix, row-major: entry `i * n_columns + j` connects
    /// input `i` to output `j`.
    pub fn weights(&self) -> Vec<f64> {
        self.weights.values().to_vec()
    }

    /// The greedy action per column, for inspecting the learned map.
    pub fn policy(&mut self) -> Vec<u32> {
        self.greedy().iter().map(|&a| a as u32).collect()
    }

    /// Fraction of launch columns the current greedy policy catches.
    /// Evaluations reuse frozen stimulus draws, so two calls with no
    /// training in between return the same value.
    pub fn catch_fraction(&mut self) -> f64 {
        let policy = self.greedy();
        let field = self.cfg.env.field_config();
        evaluate_catch_fraction(&policy, &field).expect("evaluation")
    }

    /// Fraction of rows whose diagonal weight is the strict row maximum.
    pub fn diagonal_dominance(&self) -> f64 {
        diagonal_dominance(&self.weights).expect("square matrix")
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn n_columns(&self) -> u32 {
        self.cfg.env.n_columns as u32
    }

    pub fn field_height(&self) -> f64 {
        self.cfg.env.field_height
    }

    pub fn paddle_halfwidth(&self) -> f64 {
        self.cfg.env.paddle_halfwidth
    }

    pub fn w_min(&self) -> f64 {
        self.cfg.plasticity.w_min
    }

    pub fn w_max(&self) -> f64 {
        self.cfg.plasticity.w_max
    }
}

impl DemoSim {
    /// The greedy policy under the frozen evaluation draws.
    fn greedy(&mut self) -> Vec<usize> {
        let mut rng = StdRng::seed_from_u64(self.eval_seed);
        greedy_policy(&self.weights, &mut self.population, &self.cfg, &mut rng)
            .expect("greedy policy")
    }
}
