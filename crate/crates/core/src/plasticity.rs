//! Reward-modulated STDP: eligibility traces accumulated from spike
//! pairs, digitization of the analog traces, quantized synaptic weights
//! and the three-factor update rule.
//!
//! The eligibility of synapse (i, j) is the summed pair kernel over all
//! pre/post spike pairs of the trial,
//!
//!   e_ij = sum over (t_pre on i, t_post on j) of
//!            +a_plus  exp(-(t_post - t_pre)/tau_plus)   if t_post > t_pre
//!            -a_minus exp(-(t_pre - t_post)/tau_minus)  if t_pre  > t_post
//!
//! with simultaneous pairs contributing nothing. Causal pairings
//! (pre before post) therefore drive the eligibility positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snn::SpikeTrain;

/// Pair-based STDP kernel amplitudes and time constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StdpKernel {
    /// Amplitude of the causal (pre-before-post) branch.
    pub a_plus: f64,
    /// Amplitude of the anti-causal branch.
    pub a_minus: f64,
    /// Decay of the causal branch (ms).
    pub tau_plus: f64,
    /// Decay of the anti-causal branch (ms).
    pub tau_minus: f64,
}

impl Default for StdpKernel {
    fn default() -> Self {
        StdpKernel {
            a_plus: 1.0,
            a_minus: 1.0,
            tau_plus: 20.0,
            tau_minus: 20.0,
        }
    }
}

impl StdpKernel {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_plus > 0.0) || !(self.tau_minus > 0.0) {
            return Err(Error::Parameter(format!(
                "kernel time constants must be positive (tau_plus={}, tau_minus={})",
                self.tau_plus, self.tau_minus
            )));
        }
        if !(self.a_plus >= 0.0) || !(self.a_minus >= 0.0) {
            return Err(Error::Parameter(format!(
                "kernel amplitudes must be non-negative (a_plus={}, a_minus={})",
                self.a_plus, self.a_minus
            )));
        }
        Ok(())
    }
}

/// Storage range and readout resolution of the eligibility traces. The
/// trace accumulates as an analog value clamped to +-saturation and is
/// read out through a uniform ADC with `adc_levels` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceConfig {
    pub saturation: f64,
    pub adc_levels: u32,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            saturation: 16.0,
            adc_levels: 256,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.saturation > 0.0) {
            return Err(Error::Parameter(format!(
                "trace saturation must be positive, got {}",
                self.saturation
            )));
        }
        if self.adc_levels < 2 {
            return Err(Error::Parameter(format!(
                "adc_levels must be at least 2, got {}",
                self.adc_levels
            )));
        }
        Ok(())
    }
}

/// Dense per-synapse eligibility values, row-major over input units.
#[derive(Clone, Debug, PartialEq)]
pub struct EligibilityMatrix {
    values: Vec<f64>,
    n_input: usize,
    n_output: usize,
    saturation: f64,
    adc_levels: u32,
}

impl EligibilityMatrix {
    pub fn zeros(n_input: usize, n_output: usize, config: &TraceConfig) -> Result<Self> {
        config.validate()?;
        Ok(EligibilityMatrix {
            values: vec![0.0; n_input * n_output],
            n_input,
            n_output,
            saturation: config.saturation,
            adc_levels: config.adc_levels,
        })
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn n_output(&self) -> usize {
        self.n_output
    }

    pub fn saturation(&self) -> f64 {
        self.saturation
    }

    pub fn adc_levels(&self) -> u32 {
        self.adc_levels
    }

    pub fn value(&self, input: usize, output: usize) -> f64 {
        self.values[input * self.n_output + output]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One decaying spike trace, updated lazily: the stored value is valid at
/// `t_last` and decays analytically when read at a later time.
#[derive(Clone, Copy, Default)]
struct LazyTrace {
    value: f64,
    t_last: f64,
}

impl LazyTrace {
    fn read(&self, t: f64, tau: f64) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value * (-(t - self.t_last) / tau).exp()
        }
    }

    fn bump(&mut self, t: f64, tau: f64) {
        self.value = self.read(t, tau) + 1.0;
        self.t_last = t;
    }
}

/// Accumulates the all-pairs eligibility of every synapse from one
/// trial's pre and post spike trains, clamping to the trace saturation.
///
/// Runs in O((len(pre) + len(post)) * max(n_input, n_output)) by keeping
/// one decaying trace per unit instead of visiting every pair. Spikes at
/// equal times are grouped so that simultaneous pre/post pairs see the
/// traces from strictly earlier spikes only.
pub fn accumulate_traces(
    pre: &SpikeTrain,
    post: &SpikeTrain,
    kernel: &StdpKernel,
    n_input: usize,
    n_output: usize,
    config: &TraceConfig,
) -> Result<EligibilityMatrix> {
    kernel.validate()?;
    let mut out = EligibilityMatrix::zeros(n_input, n_output, config)?;
    for ev in pre.events() {
        if ev.unit >= n_input {
            return Err(Error::Parameter(format!(
                "pre spike on unit {} exceeds {n_input} input units",
                ev.unit
            )));
        }
    }
    for ev in post.events() {
        if ev.unit >= n_output {
            return Err(Error::Parameter(format!(
                "post spike on unit {} exceeds {n_output} output units",
                ev.unit
            )));
        }
    }

    let pre_events = pre.events();
    let post_events = post.events();
    let mut pre_traces = vec![LazyTrace::default(); n_input];
    let mut post_traces = vec![LazyTrace::default(); n_output];
    let (mut ip, mut jp) = (0, 0);
    while ip < pre_events.len() || jp < post_events.len() {
        let t = match (pre_events.get(ip), post_events.get(jp)) {
            (Some(a), Some(b)) => a.time.min(b.time),
            (Some(a), None) => a.time,
            (None, Some(b)) => b.time,
            (None, None) => unreachable!(),
        };
        let pre_lo = ip;
        while ip < pre_events.len() && pre_events[ip].time == t {
            ip += 1;
        }
        let post_lo = jp;
        while jp < post_events.len() && post_events[jp].time == t {
            jp += 1;
        }
        // Pair contributions read the traces before any spike at time t
        // is added, so exactly simultaneous pairs contribute nothing.
        for ev in &post_events[post_lo..jp] {
            let j = ev.unit;
            for i in 0..n_input {
                let trace = pre_traces[i].read(t, kernel.tau_plus);
                if trace != 0.0 {
                    out.values[i * n_output + j] += kernel.a_plus * trace;
                }
            }
        }
        for ev in &pre_events[pre_lo..ip] {
            let i = ev.unit;
            for j in 0..n_output {
                let trace = post_traces[j].read(t, kernel.tau_minus);
                if trace != 0.0 {
                    out.values[i * n_output + j] -= kernel.a_minus * trace;
                }
            }
        }
        for ev in &pre_events[pre_lo..ip] {
            pre_traces[ev.unit].bump(t, kernel.tau_plus);
        }
        for ev in &post_events[post_lo..jp] {
            post_traces[ev.unit].bump(t, kernel.tau_minus);
        }
    }

    let sat = out.saturation;
    for v in &mut out.values {
        *v = v.clamp(-sat, sat);
    }
    Ok(out)
}

/// Reads the analog traces through the ADC: each value snaps to the
/// nearest of `adc_levels` uniform levels spanning [-saturation,
/// +saturation]. Idempotent, and the introduced error is at most half a
/// level step.
pub fn digitize(traces: &EligibilityMatrix) -> EligibilityMatrix {
    let sat = traces.saturation;
    let step = 2.0 * sat / (traces.adc_levels - 1) as f64;
    let mut out = traces.clone();
    for v in &mut out.values {
        let clamped = v.clamp(-sat, sat);
        let level = ((clamped + sat) / step).round();
        *v = -sat + level * step;
    }
    out
}

/// Feed-forward synaptic weights, row-major over input units. In
/// quantized mode every weight sits exactly on one of `levels` uniform
/// values spanning [w_min, w_max]; with `levels = None` the weights are
/// continuous within the same bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct SynapseMatrix {
    values: Vec<f64>,
    n_input: usize,
    n_output: usize,
    w_min: f64,
    w_max: f64,
    levels: Option<u32>,
}

impl SynapseMatrix {
    /// All-zero quantized matrix. `levels` uniform values span
    /// [w_min, w_max].
    pub fn quantized(
        n_input: usize,
        n_output: usize,
        w_min: f64,
        w_max: f64,
        levels: u32,
    ) -> Result<Self> {
        if levels < 2 {
            return Err(Error::Parameter(format!(
                "weight quantization needs at least 2 levels, got {levels}"
            )));
        }
        Self::build(n_input, n_output, w_min, w_max, Some(levels))
    }

    /// All-zero continuous matrix over [w_min, w_max].
    pub fn continuous(n_input: usize, n_output: usize, w_min: f64, w_max: f64) -> Result<Self> {
        Self::build(n_input, n_output, w_min, w_max, None)
    }

    fn build(
        n_input: usize,
        n_output: usize,
        w_min: f64,
        w_max: f64,
        levels: Option<u32>,
    ) -> Result<Self> {
        if n_input == 0 || n_output == 0 {
            return Err(Error::Parameter(format!(
                "weight matrix must be non-empty, got {n_input} x {n_output}"
            )));
        }
        if !(w_min < w_max) {
            return Err(Error::Parameter(format!(
                "weight bounds must satisfy w_min < w_max, got [{w_min}, {w_max}]"
            )));
        }
        let base = w_min.max(0.0).min(w_max);
        let mut m = SynapseMatrix {
            values: Vec::new(),
            n_input,
            n_output,
            w_min,
            w_max,
            levels,
        };
        m.values = vec![m.quantize_value(base); n_input * n_output];
        Ok(m)
    }

    pub fn n_input(&self) -> usize {
        self.n_input
    }

    pub fn n_output(&self) -> usize {
        self.n_output
    }

    pub fn w_min(&self) -> f64 {
        self.w_min
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn levels(&self) -> Option<u32> {
        self.levels
    }

    pub fn value(&self, input: usize, output: usize) -> f64 {
        self.values[input * self.n_output + output]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sets one weight, snapping it onto the representable grid.
    pub fn set(&mut self, input: usize, output: usize, w: f64) -> Result<()> {
        if input >= self.n_input || output >= self.n_output {
            return Err(Error::Parameter(format!(
                "synapse ({input}, {output}) out of range for {} x {}",
                self.n_input, self.n_output
            )));
        }
        self.values[input * self.n_output + output] = self.quantize_value(w);
        Ok(())
    }

    /// Clips to [w_min, w_max], then in quantized mode rounds to the
    /// nearest level.
    pub fn quantize_value(&self, w: f64) -> f64 {
        let clipped = w.clamp(self.w_min, self.w_max);
        match self.levels {
            None => clipped,
            Some(levels) => {
                let step = (self.w_max - self.w_min) / (levels - 1) as f64;
                let k = ((clipped - self.w_min) / step).round();
                self.w_min + k * step
            }
        }
    }

    /// Integer level index of one weight. Only defined in quantized mode.
    pub fn level_index(&self, input: usize, output: usize) -> Result<u32> {
        let levels = self.levels.ok_or_else(|| {
            Error::Parameter("level index undefined for continuous weights".into())
        })?;
        let step = (self.w_max - self.w_min) / (levels - 1) as f64;
        let k = ((self.value(input, output) - self.w_min) / step).round();
        Ok(k as u32)
    }

    /// Rebuilds a quantized matrix from integer level indices, row-major
    /// over input units.
    pub fn from_level_indices(
        rows: &[Vec<u32>],
        w_min: f64,
        w_max: f64,
        levels: u32,
    ) -> Result<Self> {
        let n_input = rows.len();
        let n_output = rows.first().map_or(0, Vec::len);
        let mut m = Self::quantized(n_input, n_output, w_min, w_max, levels)?;
        let step = (w_max - w_min) / (levels - 1) as f64;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_output {
                return Err(Error::Parameter(format!(
                    "weight row {i} has {} entries, expected {n_output}",
                    row.len()
                )));
            }
            for (j, &k) in row.iter().enumerate() {
                if k >= levels {
                    return Err(Error::Parameter(format!(
                        "weight level {k} at ({i}, {j}) exceeds {levels} levels"
                    )));
                }
                m.values[i * n_output + j] = w_min + k as f64 * step;
            }
        }
        Ok(m)
    }
}

/// How the reward baseline is tracked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    /// One moving average shared by all states.
    Global,
    /// An independent moving average per input state.
    PerState,
}

/// Learning-rule constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RstdpConfig {
    /// Learning rate applied to (reward - baseline) * eligibility.
    pub eta: f64,
    /// Smoothing factor of the exponential moving-average baseline.
    pub baseline_gamma: f64,
    pub baseline_mode: BaselineMode,
}

impl Default for RstdpConfig {
    fn default() -> Self {
        RstdpConfig {
            eta: 8.0,
            baseline_gamma: 0.2,
            baseline_mode: BaselineMode::PerState,
        }
    }
}

impl RstdpConfig {
    pub fn validate(&self) -> Result<()> {
        // eta = 0 is allowed: it disables learning, which is a useful
        // ablation.
        if !(self.eta >= 0.0) {
            return Err(Error::Parameter(format!(
                "learning rate must be non-negative, got {}",
                self.eta
            )));
        }
        if !(self.baseline_gamma > 0.0 && self.baseline_gamma <= 1.0) {
            return Err(Error::Parameter(format!(
                "baseline gamma must lie in (0, 1], got {}",
                self.baseline_gamma
            )));
        }
        Ok(())
    }
}

/// Exponential moving average of past rewards, either one scalar or one
/// per state. Starts at zero, matching an untrained network that earns
/// no reward.
#[derive(Clone, Debug, PartialEq)]
pub enum Baseline {
    Global(f64),
    PerState(Vec<f64>),
}

impl Baseline {
    pub fn new(mode: BaselineMode, n_states: usize) -> Self {
        match mode {
            BaselineMode::Global => Baseline::Global(0.0),
            BaselineMode::PerState => Baseline::PerState(vec![0.0; n_states]),
        }
    }

    /// The baseline value that applies to `state`.
    pub fn value(&self, state: usize) -> Result<f64> {
        match self {
            Baseline::Global(b) => Ok(*b),
            Baseline::PerState(bs) => bs.get(state).copied().ok_or_else(|| {
                Error::Parameter(format!(
                    "state {state} out of range for {} baselines",
                    bs.len()
                ))
            }),
        }
    }
}

/// Folds one observed reward into the baseline:
/// `b' = (1 - gamma) * b + gamma * reward` on the entry for `state`
/// (or the single global entry).
pub fn update_baseline(
    baseline: &Baseline,
    reward: f64,
    state: usize,
    cfg: &RstdpConfig,
) -> Result<Baseline> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&reward) {
        return Err(Error::Parameter(format!(
            "reward {reward} outside [0, 1]"
        )));
    }
    let gamma = cfg.baseline_gamma;
    match baseline {
        Baseline::Global(b) => Ok(Baseline::Global((1.0 - gamma) * b + gamma * reward)),
        Baseline::PerState(bs) => {
            if state >= bs.len() {
                return Err(Error::Parameter(format!(
                    "state {state} out of range for {} baselines",
                    bs.len()
                )));
            }
            let mut next = bs.clone();
            next[state] = (1.0 - gamma) * next[state] + gamma * reward;
            Ok(Baseline::PerState(next))
        }
    }
}

/// Applies the three-factor update to every synapse:
/// `w' = quantize(clip(w + eta * (reward - baseline) * e))`.
///
/// When `reward == baseline` the update is exactly the identity: the
/// modulating factor is a true zero, `w + 0` leaves every finite weight
/// bit-identical, and re-quantizing an on-grid weight is a no-op.
pub fn rstdp_update(
    weights: &SynapseMatrix,
    eligibility: &EligibilityMatrix,
    reward: f64,
    baseline: f64,
    cfg: &RstdpConfig,
) -> Result<SynapseMatrix> {
    cfg.validate()?;
    if weights.n_input != eligibility.n_input || weights.n_output != eligibility.n_output {
        return Err(Error::Parameter(format!(
            "weights are {} x {} but eligibility is {} x {}",
            weights.n_input, weights.n_output, eligibility.n_input, eligibility.n_output
        )));
    }
    let factor = cfg.eta * (reward - baseline);
    let mut out = weights.clone();
    for (w, &e) in out.values.iter_mut().zip(&eligibility.values) {
        *w = weights.quantize_value(*w + factor * e);
    }
    Ok(out)
}
