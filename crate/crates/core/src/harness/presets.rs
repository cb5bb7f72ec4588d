//! Resolved experiment descriptions and the built-in bias presets.

use serde::{Deserialize, Serialize};

use crate::dpi::DpiParams;
use crate::engine::NeuronUnitConfig;
use crate::error::{Error, Result};
use crate::neuron::NeuronConfig;
use crate::params::PhysicalConstants;
use crate::synapse::{SynapseArrayConfig, N_BRANCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Trace,
    FfCurve,
    ReluCurve,
    Montecarlo,
    ResourceReport,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "trace" => Self::Trace,
            "ff-curve" => Self::FfCurve,
            "relu" | "relu-curve" => Self::ReluCurve,
            "montecarlo" => Self::Montecarlo,
            "report" | "resource-report" => Self::ResourceReport,
            _ => return None,
        })
    }
}

/// Every bias of one neuron unit, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Biases {
    pub wht: [f64; N_BRANCHES],
    pub dpi_cap: f64,
    pub dpi_tau: f64,
    pub dpi_thr: f64,
    pub nrn_cap: f64,
    pub nrn_tau: f64,
    pub nrn_thr: f64,
    pub i_ref: f64,
    pub t_ref: f64,
    pub ahp_cap: f64,
    pub ahp_tau: f64,
    pub ahp_thr: f64,
    pub ahp_width: f64,
    pub ahp_amp: f64,
    pub i_const: f64,
    pub i_dark: f64,
    pub nmda_enabled: bool,
    pub nmda_thr: f64,
}

/// Bias names accepted in config files.
pub const BIAS_NAMES: &[&str] = &[
    "wht0!",
    "wht1!",
    "wht2!",
    "wht3!",
    "dpi_cap",
    "dpi_tau!",
    "dpi_thr!",
    "nrn_cap",
    "nrn_tau!",
    "nrn_thr!",
    "I_ref",
    "t_ref",
    "ahp_cap",
    "ahp_tau!",
    "ahp_thr!",
    "ahp_width",
    "ahp_amp",
    "I_const",
    "I_dark",
    "nmda",
    "nmda_thr",
];

impl Biases {
    /// Synapse: 1 pF, 5 pA leak (7.386 ms), gain 8. Membrane: 1.5 pF, 5 pA
    /// leak (11.08 ms), gain 20. Slow AHP with a 1 nA, 1 ms kick per spike.
    pub fn trace_defaults() -> Self {
        Self {
            wht: [10e-9, 0.0, 0.0, 0.0],
            dpi_cap: 1e-12,
            dpi_tau: 5e-12,
            dpi_thr: 40e-12,
            nrn_cap: 1.5e-12,
            nrn_tau: 5e-12,
            nrn_thr: 100e-12,
            i_ref: 20e-9,
            t_ref: 2e-3,
            ahp_cap: 1e-12,
            ahp_tau: 0.369e-12,
            ahp_thr: 0.369e-12,
            ahp_width: 1e-3,
            ahp_amp: 1e-9,
            i_const: 0.0,
            i_dark: 1e-12,
            nmda_enabled: false,
            nmda_thr: 0.0,
        }
    }

    /// Refractory-limited regime: 5 ms refractory, synapse gain 10, fast
    /// membrane (1 ms, gain 10), no adaptation.
    pub fn ff_defaults() -> Self {
        let i_tau_1ms = 1.5e-12 * 0.02585 / 0.7 / 1e-3;
        Self {
            dpi_thr: 50e-12,
            nrn_tau: i_tau_1ms,
            nrn_thr: 10.0 * i_tau_1ms,
            t_ref: 5e-3,
            ahp_amp: 0.0,
            ..Self::trace_defaults()
        }
    }

    /// ReLU regime: 1 µs refractory, synapse gain 8, slow membrane
    /// (20 ms, gain 20), no adaptation.
    pub fn relu_defaults() -> Self {
        let i_tau_20ms = 1.5e-12 * 0.02585 / 0.7 / 20e-3;
        Self {
            nrn_tau: i_tau_20ms,
            nrn_thr: 20.0 * i_tau_20ms,
            t_ref: 1e-6,
            ahp_amp: 0.0,
            ..Self::trace_defaults()
        }
    }

    pub fn synapse_dpi(&self, consts: &PhysicalConstants) -> Result<DpiParams> {
        DpiParams::new(self.dpi_cap, self.dpi_tau, self.dpi_thr, consts)
    }

    pub fn membrane_dpi(&self, consts: &PhysicalConstants) -> Result<DpiParams> {
        DpiParams::new(self.nrn_cap, self.nrn_tau, self.nrn_thr, consts)
    }

    pub fn ahp_dpi(&self, consts: &PhysicalConstants) -> Result<DpiParams> {
        DpiParams::new(self.ahp_cap, self.ahp_tau, self.ahp_thr, consts)
    }

    pub fn unit(&self, pulse_width: f64) -> Result<NeuronUnitConfig> {
        let consts = PhysicalConstants::default();
        let mut synapse =
            SynapseArrayConfig::new(self.wht, pulse_width, self.synapse_dpi(&consts)?)?;
        synapse.dark_current = self.i_dark;
        synapse.nmda_enabled = self.nmda_enabled;
        synapse.nmda_threshold = self.nmda_thr;
        synapse.validate()?;
        let neuron = NeuronConfig {
            mem: self.membrane_dpi(&consts)?,
            i_ref: self.i_ref,
            t_ref: self.t_ref,
            ahp: self.ahp_dpi(&consts)?,
            ahp_pulse_width: self.ahp_width,
            ahp_pulse_amp: self.ahp_amp,
            i_const: self.i_const,
        };
        neuron.validate()?;
        Ok(NeuronUnitConfig { synapse, neuron })
    }

    /// Slowest filter time constant, used to size warm-up windows.
    pub fn slowest_tau(&self) -> Result<f64> {
        let consts = PhysicalConstants::default();
        let mut t = self
            .synapse_dpi(&consts)?
            .tau
            .max(self.membrane_dpi(&consts)?.tau);
        if self.ahp_amp > 0.0 {
            t = t.max(self.ahp_dpi(&consts)?.tau);
        }
        Ok(t)
    }
}

/// Input spike train settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    /// Input rates in Hz; a single entry for `trace`, a sorted sweep otherwise.
    pub rates: Vec<f64>,
    pub pulse_width: f64,
    pub core: u8,
    pub block: u8,
    pub mask: u8,
    pub poisson: bool,
    /// Explicit event file replacing the generated train (trace only).
    pub file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub t_end: f64,
    pub record_dt: f64,
}

/// Output-rate measurement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    /// Warm-up before counting; `None` means 10 times the slowest time constant.
    pub warmup: Option<f64>,
    pub window: f64,
    pub min_spikes: u64,
    pub max_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchSettings {
    pub sigma: f64,
    pub instances: usize,
    /// Fail the run when the residual std exceeds this fraction.
    pub max_residual_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSize {
    pub n_neurons: u64,
    pub n_blocks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub biases: Biases,
    pub stimulus: Stimulus,
    pub engine: EngineSettings,
    pub measure: Measure,
    pub mismatch: MismatchSettings,
    /// `dpi_thr!` multipliers for the ReLU gain sweep.
    pub gain_factors: Vec<f64>,
    pub report: ReportSize,
}

impl ExperimentSpec {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (biases, rates, pulse_width) = match kind {
            ExperimentKind::FfCurve => (
                Biases::ff_defaults(),
                (0..=10).map(|k| 100.0 * k as f64).collect(),
                1e-3,
            ),
            ExperimentKind::ReluCurve => (
                Biases::relu_defaults(),
                (0..=16).map(|k| 500.0 * k as f64).collect(),
                50e-6,
            ),
            _ => (Biases::trace_defaults(), vec![100.0], 200e-6),
        };
        Self {
            kind,
            seed: 0,
            biases,
            stimulus: Stimulus {
                rates,
                pulse_width,
                core: 0,
                block: 0,
                mask: 1,
                poisson: false,
                file: None,
            },
            engine: EngineSettings {
                t_end: 0.3,
                record_dt: 1e-4,
            },
            measure: Measure {
                warmup: None,
                window: 1.0,
                min_spikes: 50,
                max_window: 16.0,
            },
            mismatch: MismatchSettings {
                sigma: 0.05,
                instances: 1000,
                max_residual_std: 0.009,
            },
            gain_factors: vec![1.0, 2.0],
            report: ReportSize {
                n_neurons: 1,
                n_blocks: 64,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.stimulus;
        if s.rates.is_empty() {
            return Err(Error::config("stimulus rate list is empty"));
        }
        if s.rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::config("stimulus rates must be finite and >= 0"));
        }
        if s.rates.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config("stimulus rate sweep must be sorted"));
        }
        if s.block >= 64 || s.mask >= 16 {
            return Err(Error::config("stimulus block must be < 64 and mask < 16"));
        }
        if !(self.engine.t_end > 0.0 && self.engine.record_dt > 0.0) {
            return Err(Error::config("t_end and record_dt must be positive"));
        }
        let m = &self.measure;
        if !(m.window > 0.0 && m.max_window >= m.window) || m.warmup.is_some_and(|w| w < 0.0) {
            return Err(Error::config(
                "measurement window settings are inconsistent",
            ));
        }
        if self.kind == ExperimentKind::Montecarlo && self.mismatch.instances < 100 {
            return Err(Error::config("montecarlo needs at least 100 instances"));
        }
        if !(self.mismatch.sigma >= 0.0 && self.mismatch.sigma.is_finite()) {
            return Err(Error::config("mismatch sigma must be >= 0"));
        }
        if self.gain_factors.is_empty() || self.gain_factors.iter().any(|g| g.is_nan() || *g <= 0.0) {
            return Err(Error::config("gain factors must be positive"));
        }
        self.biases
            .unit(s.pulse_width)
            .map_err(|e| Error::config(e.to_string()))?;
        Ok(())
    }
}

/// Trace unit: 200 µs pulses, default trace biases.
pub fn trace_unit() -> Result<NeuronUnitConfig> {
    Biases::trace_defaults().unit(200e-6)
}
