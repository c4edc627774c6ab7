//! One declarative configuration for every module, organized as flat
//! sections that mirror the module names. Every key has a default, so an
//! empty configuration is a complete, runnable experiment. Unknown keys
//! are rejected during deserialization: a typo must fail loudly rather
//! than silently fall back to a default.

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::error::{Error, Result};
use crate::plasticity::{BaselineMode, RstdpConfig, StdpKernel, TraceConfig};
use crate::pong::{FieldConfig, RewardSchedule};
use crate::snn::{NeuronParams, NoiseConfig, TrialParams};

/// Order in which ball columns are presented during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateSchedule {
    /// Columns 0, 1, ..., n-1, 0, 1, ... in order. Useful for debugging.
    Cyclic,
    /// An independent uniform draw per iteration.
    UniformRandom,
}

/// The `[experiment]` section: loop length, seeding and evaluation
/// cadence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    pub n_iterations: usize,
    pub state_schedule: StateSchedule,
    pub seed: u64,
    /// Greedy catch-fraction evaluation runs after every this many
    /// iterations.
    pub eval_every: usize,
    /// Noise-free trials averaged per state during evaluation.
    pub eval_repeats: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            n_iterations: 2000,
            state_schedule: StateSchedule::UniformRandom,
            seed: 1,
            eval_every: 100,
            eval_repeats: 5,
        }
    }
}

/// The `[snn]` section: network shape, neuron constants (ms / mV) and
/// input encoding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnnSettings {
    pub n_input: usize,
    pub n_output: usize,
    pub tau_m: f64,
    pub tau_syn: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thresh: f64,
    pub tau_refrac: f64,
    pub dt: f64,
    /// Stimulus presentation window per iteration (ms).
    pub trial_duration: f64,
    /// Poisson rate of the active input unit (Hz).
    pub rate_hi: f64,
    /// Poisson rate of every other input unit (Hz).
    pub rate_lo: f64,
    /// Synaptic deflection per input spike per unit weight (mV).
    pub current_scale: f64,
}

impl Default for SnnSettings {
    fn default() -> Self {
        SnnSettings {
            n_input: 32,
            n_output: 32,
            tau_m: 10.0,
            tau_syn: 5.0,
            v_rest: -65.0,
            v_reset: -70.0,
            v_thresh: -55.0,
            tau_refrac: 2.0,
            dt: 0.1,
            trial_duration: 50.0,
            rate_hi: 70.0,
            rate_lo: 0.0,
            current_scale: 1.0,
        }
    }
}

impl SnnSettings {
    pub fn neuron_params(&self) -> NeuronParams {
        NeuronParams {
            tau_m: self.tau_m,
            tau_syn: self.tau_syn,
            v_rest: self.v_rest,
            v_reset: self.v_reset,
            v_thresh: self.v_thresh,
            tau_refrac: self.tau_refrac,
        }
    }

    pub fn trial_params(&self) -> TrialParams {
        TrialParams {
            duration: self.trial_duration,
            dt: self.dt,
            current_scale: self.current_scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_input == 0 || self.n_output == 0 {
            return Err(Error::Config(format!(
                "network must be non-empty, got {} x {}",
                self.n_input, self.n_output
            )));
        }
        self.neuron_params().validate()?;
        self.neuron_params().check_dt(self.dt)?;
        self.trial_params().validate()?;
        if !(self.rate_lo >= 0.0) || !(self.rate_hi > self.rate_lo) {
            return Err(Error::Config(format!(
                "encoding rates must satisfy rate_hi > rate_lo >= 0, got {} / {}",
                self.rate_hi, self.rate_lo
            )));
        }
        Ok(())
    }
}

/// The `[plasticity]` section: STDP kernel, trace storage, weight grid
/// and learning rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlasticitySettings {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub trace_saturation: f64,
    pub adc_levels: u32,
    pub w_min: f64,
    pub w_max: f64,
    /// Number of representable weight values; 0 selects continuous
    /// weights (an ablation mode).
    pub weight_levels: u32,
    pub eta: f64,
    pub baseline_gamma: f64,
    pub baseline_mode: BaselineMode,
}

impl Default for PlasticitySettings {
    fn default() -> Self {
        PlasticitySettings {
            a_plus: 1.0,
            a_minus: 1.0,
            tau_plus: 20.0,
            tau_minus: 20.0,
            trace_saturation: 16.0,
            adc_levels: 256,
            w_min: 0.0,
            w_max: 63.0,
            weight_levels: 64,
            eta: 8.0,
            baseline_gamma: 0.2,
            baseline_mode: BaselineMode::PerState,
        }
    }
}

impl PlasticitySettings {
    pub fn kernel(&self) -> StdpKernel {
        StdpKernel {
            a_plus: self.a_plus,
            a_minus: self.a_minus,
            tau_plus: self.tau_plus,
            tau_minus: self.tau_minus,
        }
    }

    pub fn trace_config(&self) -> TraceConfig {
        TraceConfig {
            saturation: self.trace_saturation,
            adc_levels: self.adc_levels,
        }
    }

    pub fn rstdp_config(&self) -> RstdpConfig {
        RstdpConfig {
            eta: self.eta,
            baseline_gamma: self.baseline_gamma,
            baseline_mode: self.baseline_mode,
        }
    }

    /// `Some(levels)` in quantized mode, `None` for continuous weights.
    pub fn levels(&self) -> Option<u32> {
        if self.weight_levels == 0 {
            None
        } else {
            Some(self.weight_levels)
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel().validate()?;
        self.trace_config().validate()?;
        self.rstdp_config().validate()?;
        if !(self.w_min < self.w_max) {
            return Err(Error::Config(format!(
                "weight bounds must satisfy w_min < w_max, got [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        if self.weight_levels == 1 {
            return Err(Error::Config(
                "weight_levels must be 0 (continuous) or at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// The `[env]` section: game geometry and reward shape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvSettings {
    pub n_columns: usize,
    pub field_height: f64,
    pub ball_speed: f64,
    pub paddle_speed: f64,
    pub paddle_halfwidth: f64,
    pub reward_halfwidth: usize,
}

impl Default for EnvSettings {
    fn default() -> Self {
        EnvSettings {
            n_columns: 32,
            field_height: 32.0,
            ball_speed: 1.0,
            paddle_speed: 1.0,
            paddle_halfwidth: 1.0,
            reward_halfwidth: 1,
        }
    }
}

impl EnvSettings {
    pub fn field_config(&self) -> FieldConfig {
        FieldConfig {
            n_columns: self.n_columns,
            field_height: self.field_height,
            ball_speed: self.ball_speed,
            paddle_speed: self.paddle_speed,
            paddle_halfwidth: self.paddle_halfwidth,
        }
    }

    pub fn reward_schedule(&self) -> RewardSchedule {
        RewardSchedule {
            halfwidth: self.reward_halfwidth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.field_config().validate()?;
        self.reward_schedule().validate()?;
        Ok(())
    }
}

/// The complete configuration: one struct per file, one field per
/// section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSettings,
    pub snn: SnnSettings,
    pub plasticity: PlasticitySettings,
    pub env: EnvSettings,
    pub noise: NoiseConfig,
    pub bench: BenchConfig,
}

impl ExperimentConfig {
    /// Validates every section plus the cross-section couplings the
    /// closed loop depends on.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.n_iterations == 0 {
            return Err(Error::Config("n_iterations must be positive".into()));
        }
        if self.experiment.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if self.experiment.eval_repeats == 0 {
            return Err(Error::Config("eval_repeats must be positive".into()));
        }
        self.snn.validate()?;
        self.plasticity.validate()?;
        self.env.validate()?;
        self.noise.validate()?;
        self.bench.validate()?;
        // The loop identifies ball columns with input units and actions
        // with output units, so all three extents must agree.
        if self.snn.n_input != self.env.n_columns || self.snn.n_output != self.env.n_columns {
            return Err(Error::Config(format!(
                "network shape {} x {} must match the {} game columns",
                self.snn.n_input, self.snn.n_output, self.env.n_columns
            )));
        }
        Ok(())
    }
}
