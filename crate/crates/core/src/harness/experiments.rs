//! The experiment drivers behind the CLI subcommands.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{linear_fit, LinearFit};
use super::presets::{Biases, ExperimentSpec};
use crate::aer::{encode_input, read_events, AerEvent};
use crate::engine::{run, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::params::{MismatchModel, PhysicalConstants};
use crate::synapse::{SynapseArray, SynapseMismatch, N_BRANCHES};

/// Events at `k / rate` for every `k` with `k / rate < t_stop`.
pub fn periodic_train(rate: f64, t_stop: f64, address: u32) -> Vec<AerEvent> {
    if rate <= 0.0 {
        return Vec::new();
    }
    (0..)
        .map(|k| k as f64 / rate)
        .take_while(|&t| t < t_stop)
        .map(|timestamp| AerEvent { timestamp, address })
        .collect()
}

/// Poisson train with exponential inter-spike intervals, seeded.
pub fn poisson_train(rate: f64, t_stop: f64, address: u32, seed: u64) -> Vec<AerEvent> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let isi = Exp::new(rate).expect("positive rate");
    let mut out = Vec::new();
    let mut t = isi.sample(&mut rng);
    while t < t_stop {
        out.push(AerEvent {
            timestamp: t,
            address,
        });
        t += isi.sample(&mut rng);
    }
    out
}

fn generated_train(
    spec: &ExperimentSpec,
    rate: f64,
    t_stop: f64,
    seed: u64,
) -> Result<Vec<AerEvent>> {
    let s = &spec.stimulus;
    let address = encode_input(s.core, s.block, s.mask)?;
    Ok(if s.poisson {
        poisson_train(rate, t_stop, address, seed)
    } else {
        periodic_train(rate, t_stop, address)
    })
}

fn sim_config(
    spec: &ExperimentSpec,
    biases: &Biases,
    t_end: f64,
    record_dt: Option<f64>,
) -> Result<SimConfig> {
    let unit = biases.unit(spec.stimulus.pulse_width)?;
    let mut cfg = SimConfig::single_unit(unit, t_end, record_dt);
    cfg.cores[0].id = spec.stimulus.core;
    cfg.seed = spec.seed;
    Ok(cfg)
}

/// Membrane and synaptic traces plus spike times for one stimulus.
pub fn run_trace(spec: &ExperimentSpec) -> Result<SimResult> {
    let t_end = spec.engine.t_end;
    let events = match &spec.stimulus.file {
        Some(path) => {
            let f = std::fs::File::open(path).map_err(|e| Error::config(format!("{path}: {e}")))?;
            read_events(f)?
        }
        None => generated_train(spec, spec.stimulus.rates[0], t_end, spec.seed)?,
    };
    let cfg = sim_config(spec, &spec.biases, t_end, Some(spec.engine.record_dt))?;
    run(&cfg, &events)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub input_hz: f64,
    pub output_hz: f64,
    /// Spikes inside the measurement window.
    pub spikes: u64,
    pub warmup_s: f64,
    pub window_s: f64,
}

/// Output rate from spikes inside a window: `(n - 1) / (t_last - t_first)`
/// for two or more spikes, else `n / window`.
///
/// Timing the span between the first and last spike keeps a periodic
/// train from being over-counted by a spike that lands on each window edge.
pub fn rate_from_spikes(times: &[f64], window: f64) -> f64 {
    match times {
        [] => 0.0,
        [_] => 1.0 / window,
        [first, .., last] => (times.len() - 1) as f64 / (last - first),
    }
}

/// Steady-state output rate at one input rate. The window doubles until it
/// holds `min_spikes` spikes or reaches `max_window`.
pub fn measure_rate(
    spec: &ExperimentSpec,
    biases: &Biases,
    input_hz: f64,
    seed: u64,
) -> Result<RatePoint> {
    let m = &spec.measure;
    let warmup = match m.warmup {
        Some(w) => w,
        None => 10.0 * biases.slowest_tau()?,
    };
    let mut window = m.window;
    loop {
        let t_end = warmup + window;
        let cfg = sim_config(spec, biases, t_end, None)?;
        let events = generated_train(spec, input_hz, t_end, seed)?;
        let result = run(&cfg, &events)?;
        let times: Vec<f64> = result
            .spikes
            .iter()
            .map(|s| s.time)
            .filter(|&t| t >= warmup)
            .collect();
        let n = times.len() as u64;
        if n >= m.min_spikes || window >= m.max_window {
            return Ok(RatePoint {
                input_hz,
                output_hz: rate_from_spikes(&times, window),
                spikes: n,
                warmup_s: warmup,
                window_s: window,
            });
        }
        window = (2.0 * window).min(m.max_window);
    }
}

fn sweep(spec: &ExperimentSpec, biases: &Biases) -> Result<Vec<RatePoint>> {
    spec.stimulus
        .rates
        .par_iter()
        .enumerate()
        .map(|(i, &r)| measure_rate(spec, biases, r, spec.seed.wrapping_add(i as u64)))
        .collect()
}

/// Input rate to output rate table, sorted by input rate.
pub fn run_ff_curve(spec: &ExperimentSpec) -> Result<Vec<RatePoint>> {
    sweep(spec, &spec.biases)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluCurve {
    pub gain_factor: f64,
    pub dpi_thr: f64,
    pub points: Vec<RatePoint>,
    /// Fit over points with `0 < output <= 0.5 / t_ref`.
    pub fit: Option<LinearFit>,
    /// Input rate where the fitted line reaches zero.
    pub onset_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluOutput {
    pub curves: Vec<ReluCurve>,
    /// Each curve's slope over the first curve's slope.
    pub slope_ratios: Vec<Option<f64>>,
}

/// ReLU transfer curve, repeated for each `dpi_thr!` multiplier in `gain_factors`.
pub fn run_relu_curve(spec: &ExperimentSpec) -> Result<ReluOutput> {
    let bound = 0.5 / spec.biases.t_ref;
    let curves = spec
        .gain_factors
        .iter()
        .map(|&g| {
            let biases = Biases {
                dpi_thr: spec.biases.dpi_thr * g,
                ..spec.biases.clone()
            };
            let points = sweep(spec, &biases)?;
            let (x, y): (Vec<f64>, Vec<f64>) = points
                .iter()
                .filter(|p| p.output_hz > 0.0 && p.output_hz <= bound)
                .map(|p| (p.input_hz, p.output_hz))
                .unzip();
            let fit = (x.len() >= 2).then(|| linear_fit(&x, &y)).transpose()?;
            Ok(ReluCurve {
                gain_factor: g,
                dpi_thr: biases.dpi_thr,
                onset_hz: fit.as_ref().map(LinearFit::x_intercept),
                fit,
                points,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let base = curves[0].fit.as_ref().map(|f| f.slope);
    let slope_ratios = curves
        .iter()
        .map(|c| Some(c.fit.as_ref()?.slope / base?))
        .collect();
    Ok(ReluOutput {
        curves,
        slope_ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// Sample statistics (`n - 1` in the variance) over the finite values.
    pub fn of(values: &[f64]) -> Option<Self> {
        let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 {
            v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Self {
            mean,
            std: var.sqrt(),
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloStats {
    pub sigma: f64,
    pub instances: usize,
    pub seed: u64,
    /// `(I_leak - I_dark) / I_dark` per instance.
    pub residuals: Vec<f64>,
    pub residual: Summary,
    /// `sigma * sqrt(1280) / 256`, the first-order spread of the residual.
    pub analytic_std: f64,
    pub max_residual_std: f64,
    /// Input rate at which the mean synaptic drive brings the membrane to `I_ref`.
    /// Infinite when the mismatched weight cannot reach threshold.
    pub onsets_hz: Vec<f64>,
    pub onset: Option<Summary>,
    pub passed: bool,
}

/// Mean-drive onset rate of one mismatched unit.
///
/// Between pulses the DPI sees the idle residual `B = max(0, I_dark - I_leak)`;
/// during a pulse it sees `A = max(0, w - dark(masked) + I_dark - I_leak)`.
/// The time-averaged input is `B + r * width * (A - B)`, and the onset is the
/// rate `r` at which `gain_mem * (gain_syn * mean + I_const)` equals `I_ref`.
pub fn mean_drive_onset(
    array: &SynapseArray,
    biases: &Biases,
    block: usize,
    mask: u8,
) -> Result<f64> {
    let consts = PhysicalConstants::default();
    let g_syn = biases.synapse_dpi(&consts)?.gain;
    let g_mem = biases.membrane_dpi(&consts)?.gain;
    let idle = array.idle_dark_current();
    let resid = idle - array.leak_estimate();
    let masked_dark: f64 = (0..N_BRANCHES)
        .filter(|i| mask & (1 << i) != 0)
        .map(|i| array.config.dark_current * array.mismatch.branch_factor(block, i))
        .sum();
    let a = (array.weight_current(block, mask)? - masked_dark + resid).max(0.0);
    let b = resid.max(0.0);
    let needed = (biases.i_ref / g_mem - biases.i_const) / g_syn;
    let width = array.config.pulse_width;
    Ok(if needed <= b {
        0.0
    } else if a <= b {
        f64::INFINITY
    } else {
        (needed - b) / (width * (a - b))
    })
}

pub fn run_montecarlo(spec: &ExperimentSpec) -> Result<MonteCarloStats> {
    let mm = &spec.mismatch;
    let model = MismatchModel::new(mm.sigma, spec.seed)?;
    let unit = spec.biases.unit(spec.stimulus.pulse_width)?;
    let (block, mask) = (spec.stimulus.block as usize, spec.stimulus.mask);
    let per_instance = (0..mm.instances as u64)
        .into_par_iter()
        .map(|i| {
            let mismatch = SynapseMismatch::sample(&model, i, unit.synapse.n_leak_cells);
            let array = SynapseArray::new(unit.synapse.clone(), mismatch)?;
            let dark = array.idle_dark_current();
            let residual = (array.leak_estimate() - dark) / dark;
            let onset = mean_drive_onset(&array, &spec.biases, block, mask)?;
            Ok((residual, onset))
        })
        .collect::<Result<Vec<_>>>()?;
    let (residuals, onsets_hz): (Vec<f64>, Vec<f64>) = per_instance.into_iter().unzip();
    let residual = Summary::of(&residuals).ok_or_else(|| Error::invalid("no instances"))?;
    let passed = if mm.sigma == 0.0 {
        residuals.iter().all(|&r| r == 0.0)
    } else {
        residual.std < mm.max_residual_std
    };
    Ok(MonteCarloStats {
        sigma: mm.sigma,
        instances: mm.instances,
        seed: spec.seed,
        analytic_std: mm.sigma * 1280f64.sqrt() / 256.0,
        max_residual_std: mm.max_residual_std,
        onset: Summary::of(&onsets_hz),
        residuals,
        residual,
        onsets_hz,
        passed,
    })
}
