//! Leaky integrate-and-fire simulation: Poisson input encoding, neuron
//! dynamics, trial execution and parameter-level noise.
//!
//! All times are in milliseconds, voltages in millivolts. Synapses are
//! current-based: a presynaptic spike deposits a step onto the target's
//! synaptic current, which then decays with `tau_syn`. The membrane uses
//! the exponential-Euler update, which is exact for piecewise-constant
//! drive and unconditionally stable.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{Error, Result};
use crate::plasticity::SynapseMatrix;

/// Membrane and synapse constants of one LIF neuron.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Synaptic current time constant (ms).
    pub tau_syn: f64,
    /// Resting potential (mV).
    pub v_rest: f64,
    /// Post-spike reset potential (mV).
    pub v_reset: f64,
    /// Spike threshold (mV).
    pub v_thresh: f64,
    /// Absolute refractory period (ms).
    pub tau_refrac: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_m: 10.0,
            tau_syn: 5.0,
            v_rest: -65.0,
            v_reset: -70.0,
            v_thresh: -55.0,
            tau_refrac: 2.0,
        }
    }
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) || !(self.tau_syn > 0.0) {
            return Err(Error::Parameter(format!(
                "time constants must be positive (tau_m={}, tau_syn={})",
                self.tau_m, self.tau_syn
            )));
        }
        if !(self.tau_refrac >= 0.0) {
            return Err(Error::Parameter(format!(
                "refractory period must be non-negative (tau_refrac={})",
                self.tau_refrac
            )));
        }
        if !(self.v_reset < self.v_thresh) || !(self.v_rest < self.v_thresh) {
            return Err(Error::Parameter(format!(
                "threshold must exceed rest and reset (v_rest={}, v_reset={}, v_thresh={})",
                self.v_rest, self.v_reset, self.v_thresh
            )));
        }
        Ok(())
    }

    /// Checks the integration step against this neuron's time constants.
    /// The exponential-Euler update is stable for any dt, but a step above
    /// a fifth of the fastest time constant samples the synaptic kernel
    /// too coarsely to trust the spike times.
    pub fn check_dt(&self, dt: f64) -> Result<()> {
        let limit = self.tau_m.min(self.tau_syn) / 5.0;
        if !(dt > 0.0) || dt > limit {
            return Err(Error::Config(format!(
                "dt={dt} outside (0, {limit}] for tau_m={}, tau_syn={}",
                self.tau_m, self.tau_syn
            )));
        }
        Ok(())
    }
}

/// Mutable per-neuron state between integration steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeuronState {
    /// Membrane potential (mV).
    pub v: f64,
    /// Synaptic current, expressed as the membrane deflection it drives
    /// at steady state (mV).
    pub i_syn: f64,
    /// Time left in the refractory period (ms). Zero when integrating.
    pub refrac_remaining: f64,
}

impl NeuronState {
    pub fn resting(params: &NeuronParams) -> Self {
        NeuronState {
            v: params.v_rest,
            i_syn: 0.0,
            refrac_remaining: 0.0,
        }
    }
}

/// A group of output neurons with per-neuron parameters, so fixed-pattern
/// parameter noise can make them inhomogeneous.
#[derive(Clone, Debug)]
pub struct Population {
    params: Vec<NeuronParams>,
    states: Vec<NeuronState>,
}

impl Population {
    /// `n` identical neurons at rest.
    pub fn homogeneous(n: usize, nominal: NeuronParams) -> Result<Self> {
        nominal.validate()?;
        Ok(Population {
            params: vec![nominal; n],
            states: vec![NeuronState::resting(&nominal); n],
        })
    }

    /// One neuron per entry of `params`, at rest.
    pub fn from_params(params: Vec<NeuronParams>) -> Result<Self> {
        for p in &params {
            p.validate()?;
        }
        let states = params.iter().map(NeuronState::resting).collect();
        Ok(Population { params, states })
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[NeuronParams] {
        &self.params
    }

    pub fn states(&self) -> &[NeuronState] {
        &self.states
    }

    /// Returns every neuron to rest with no synaptic current. Trials are
    /// independent, so this runs at the start of each one.
    pub fn reset(&mut self) {
        for (state, params) in self.states.iter_mut().zip(&self.params) {
            *state = NeuronState::resting(params);
        }
    }
}

/// One spike: when and on which unit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikeEvent {
    /// Spike time (ms).
    pub time: f64,
    /// Index of the unit that fired.
    pub unit: usize,
}

/// A time-sorted list of spikes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpikeTrain {
    events: Vec<SpikeEvent>,
}

impl SpikeTrain {
    pub fn empty() -> Self {
        SpikeTrain { events: Vec::new() }
    }

    /// Wraps events, enforcing non-negative times in non-decreasing order.
    pub fn from_events(events: Vec<SpikeEvent>) -> Result<Self> {
        for (k, ev) in events.iter().enumerate() {
            if !(ev.time >= 0.0) {
                return Err(Error::Parameter(format!(
                    "spike {k} has invalid time {}",
                    ev.time
                )));
            }
            if k > 0 && ev.time < events[k - 1].time {
                return Err(Error::Parameter(format!(
                    "spike {k} at t={} precedes its predecessor at t={}",
                    ev.time,
                    events[k - 1].time
                )));
            }
        }
        Ok(SpikeTrain { events })
    }

    pub fn events(&self) -> &[SpikeEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Spike count per unit, for units `0..n_units`.
    pub fn counts(&self, n_units: usize) -> Vec<usize> {
        let mut counts = vec![0; n_units];
        for ev in &self.events {
            counts[ev.unit] += 1;
        }
        counts
    }
}

/// Noise applied to the simulation, both the frozen parameter mismatch
/// and the per-step current fluctuations.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Relative spread of per-neuron parameter mismatch (dimensionless).
    pub fixed_pattern_sigma: f64,
    /// Standard deviation of the white current noise added to each neuron
    /// at every step (mV of steady-state deflection).
    pub trial_noise_current_sigma: f64,
    /// Seed for drawing the fixed-pattern mismatch. When absent it is
    /// derived from the experiment seed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            fixed_pattern_sigma: 0.0,
            trial_noise_current_sigma: 35.0,
            seed: None,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_pattern_sigma >= 0.0) || !(self.trial_noise_current_sigma >= 0.0) {
            return Err(Error::Config(format!(
                "noise sigmas must be non-negative (fixed_pattern={}, trial={})",
                self.fixed_pattern_sigma, self.trial_noise_current_sigma
            )));
        }
        Ok(())
    }
}

/// Timing and input scaling of one stimulus trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialParams {
    /// Trial length (ms).
    pub duration: f64,
    /// Integration step (ms).
    pub dt: f64,
    /// Synaptic deflection per input spike per unit weight (mV).
    pub current_scale: f64,
}

impl TrialParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Parameter(format!(
                "trial duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.current_scale > 0.0) {
            return Err(Error::Parameter(format!(
                "current scale must be positive, got {}",
                self.current_scale
            )));
        }
        Ok(())
    }
}

/// Splittable per-unit substream seed, so a unit's spike train does not
/// depend on how many other units are being encoded.
fn unit_stream_seed(seed: u64, unit: usize) -> u64 {
    seed ^ (unit as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Encodes a one-hot stimulus as Poisson spike trains: the active unit
/// fires at `rate_hi` Hz, every other unit at `rate_lo` Hz, for
/// `duration` ms. Same arguments and seed give the same train.
pub fn poisson_encode(
    active_unit: usize,
    n_units: usize,
    rate_hi: f64,
    rate_lo: f64,
    duration: f64,
    rng_seed: u64,
) -> Result<SpikeTrain> {
    if active_unit >= n_units {
        return Err(Error::Parameter(format!(
            "active unit {active_unit} out of range for {n_units} units"
        )));
    }
    if !(rate_lo >= 0.0) || !(rate_hi > rate_lo) {
        return Err(Error::Parameter(format!(
            "rates must satisfy hi > lo >= 0, got hi={rate_hi}, lo={rate_lo}"
        )));
    }
    if !(duration > 0.0) {
        return Err(Error::Parameter(format!(
            "duration must be positive, got {duration}"
        )));
    }
    let mut events = Vec::new();
    for unit in 0..n_units {
        let rate_hz = if unit == active_unit { rate_hi } else { rate_lo };
        if rate_hz == 0.0 {
            continue;
        }
        // Exponential inter-arrival times at `rate_hz` spikes per second,
        // expressed per millisecond.
        let inter = Exp::new(rate_hz / 1000.0)
            .map_err(|_| Error::Parameter(format!("invalid rate {rate_hz}")))?;
        let mut rng = StdRng::seed_from_u64(unit_stream_seed(rng_seed, unit));
        let mut t = inter.sample(&mut rng);
        while t < duration {
            events.push(SpikeEvent { time: t, unit });
            t += inter.sample(&mut rng);
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.unit.cmp(&b.unit)));
    SpikeTrain::from_events(events)
}

/// Exponential decay factors for one step, precomputed per neuron.
#[derive(Clone, Copy)]
struct StepDecays {
    membrane: f64,
    synapse: f64,
}

impl StepDecays {
    fn new(params: &NeuronParams, dt: f64) -> Self {
        StepDecays {
            membrane: (-dt / params.tau_m).exp(),
            synapse: (-dt / params.tau_syn).exp(),
        }
    }
}

/// One exponential-Euler step: decays the synaptic current, then relaxes
/// the membrane toward `v_rest + drive`. Refractory neurons hold at
/// `v_reset` and only count down. Returns the new state and whether the
/// neuron fired on this step.
fn step_neuron(
    state: &NeuronState,
    params: &NeuronParams,
    decays: StepDecays,
    dt: f64,
    input_current: f64,
    noise_current: f64,
) -> (NeuronState, bool) {
    let i_syn = state.i_syn * decays.synapse;
    if state.refrac_remaining > 0.0 {
        let next = NeuronState {
            v: params.v_reset,
            i_syn,
            refrac_remaining: (state.refrac_remaining - dt).max(0.0),
        };
        return (next, false);
    }
    let drive = i_syn + input_current + noise_current;
    let target = params.v_rest + drive;
    let v = target + (state.v - target) * decays.membrane;
    if v >= params.v_thresh {
        let next = NeuronState {
            v: params.v_reset,
            i_syn,
            refrac_remaining: params.tau_refrac,
        };
        (next, true)
    } else {
        let next = NeuronState {
            v,
            i_syn,
            refrac_remaining: 0.0,
        };
        (next, false)
    }
}

/// Advances a single neuron by one step of `dt` ms under the given
/// currents. Returns the new state and whether it fired.
pub fn lif_step(
    state: &NeuronState,
    params: &NeuronParams,
    input_current: f64,
    noise_current: f64,
    dt: f64,
) -> Result<(NeuronState, bool)> {
    params.validate()?;
    params.check_dt(dt)?;
    let decays = StepDecays::new(params, dt);
    Ok(step_neuron(
        state,
        params,
        decays,
        dt,
        input_current,
        noise_current,
    ))
}

/// Runs one feed-forward trial: input spikes are delivered through the
/// weight matrix onto the population's synaptic currents, the population
/// integrates for the full duration, and output spikes are collected.
///
/// The population starts from rest; its state is left at the trial's end.
/// With `noise.trial_noise_current_sigma > 0`, each neuron also receives
/// an independent Gaussian current on every step, drawn from `rng_seed`.
/// Returns the output train and an echo of the input train.
pub fn run_trial(
    weights: &SynapseMatrix,
    population: &mut Population,
    input: &SpikeTrain,
    trial: &TrialParams,
    noise: &NoiseConfig,
    rng_seed: u64,
) -> Result<(SpikeTrain, SpikeTrain)> {
    trial.validate()?;
    noise.validate()?;
    let n_neurons = population.len();
    if weights.n_output() != n_neurons {
        return Err(Error::Parameter(format!(
            "weight matrix has {} outputs but population has {n_neurons} neurons",
            weights.n_output()
        )));
    }
    for p in &population.params {
        p.check_dt(trial.dt)?;
    }

    let n_steps = (trial.duration / trial.dt).ceil() as usize;
    // Input spikes land in the step containing their time; a spike at
    // exactly `duration` joins the final step.
    let mut arrivals: Vec<Vec<usize>> = vec![Vec::new(); n_steps];
    for (k, ev) in input.events().iter().enumerate() {
        if ev.unit >= weights.n_input() {
            return Err(Error::Parameter(format!(
                "input spike {k} on unit {} exceeds {} input units",
                ev.unit,
                weights.n_input()
            )));
        }
        if ev.time > trial.duration {
            return Err(Error::Parameter(format!(
                "input spike {k} at t={} is after the trial end {}",
                ev.time, trial.duration
            )));
        }
        let step = ((ev.time / trial.dt).floor() as usize).min(n_steps - 1);
        arrivals[step].push(ev.unit);
    }

    let decays: Vec<StepDecays> = population
        .params
        .iter()
        .map(|p| StepDecays::new(p, trial.dt))
        .collect();
    let sigma = noise.trial_noise_current_sigma;
    let noise_dist = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|_| {
            Error::Parameter(format!("invalid trial noise sigma {sigma}"))
        })?)
    } else {
        None
    };
    let mut rng = StdRng::seed_from_u64(rng_seed);

    population.reset();
    let mut out_events = Vec::new();
    for step in 0..n_steps {
        for &unit in &arrivals[step] {
            for j in 0..n_neurons {
                population.states[j].i_syn += weights.value(unit, j) * trial.current_scale;
            }
        }
        // The spike is attributed to the end of the step that crossed
        // threshold.
        let t_spike = (step as f64 + 1.0) * trial.dt;
        for j in 0..n_neurons {
            let noise_current = match &noise_dist {
                Some(dist) => dist.sample(&mut rng),
                None => 0.0,
            };
            let (next, fired) = step_neuron(
                &population.states[j],
                &population.params[j],
                decays[j],
                trial.dt,
                0.0,
                noise_current,
            );
            population.states[j] = next;
            if fired {
                out_events.push(SpikeEvent {
                    time: t_spike,
                    unit: j,
                });
            }
        }
    }
    let output = SpikeTrain::from_events(out_events)?;
    Ok((output, input.clone()))
}

/// Mean firing rate of each unit in Hz over a window of `duration` ms.
pub fn firing_rates(output: &SpikeTrain, n_neurons: usize, duration: f64) -> Result<Vec<f64>> {
    if !(duration > 0.0) {
        return Err(Error::Parameter(format!(
            "duration must be positive, got {duration}"
        )));
    }
    for ev in output.events() {
        if ev.unit >= n_neurons {
            return Err(Error::Parameter(format!(
                "spike on unit {} exceeds {n_neurons} units",
                ev.unit
            )));
        }
    }
    Ok(output
        .counts(n_neurons)
        .into_iter()
        .map(|c| c as f64 * 1000.0 / duration)
        .collect())
}

/// Draws `n` parameter sets around `nominal` with multiplicative Gaussian
/// mismatch on the threshold and membrane time constant: each becomes
/// `nominal * (1 + eps)` with `eps ~ N(0, sigma)`. Draws that violate the
/// parameter invariants are rejected and redrawn. The same seed gives the
/// same mismatch, which is what makes the pattern "fixed".
pub fn apply_fixed_pattern_noise(
    nominal: &NeuronParams,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Vec<NeuronParams>> {
    nominal.validate()?;
    if !(sigma >= 0.0) {
        return Err(Error::Parameter(format!(
            "sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![*nominal; n]);
    }
    let dist = Normal::new(0.0, sigma)
        .map_err(|_| Error::Parameter(format!("invalid sigma {sigma}")))?;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        loop {
            let eps_thresh = dist.sample(&mut rng);
            let eps_tau = dist.sample(&mut rng);
            let candidate = NeuronParams {
                v_thresh: nominal.v_thresh * (1.0 + eps_thresh),
                tau_m: nominal.tau_m * (1.0 + eps_tau),
                ..*nominal
            };
            if candidate.validate().is_ok() {
                out.push(candidate);
                break;
            }
        }
    }
    Ok(out)
}
