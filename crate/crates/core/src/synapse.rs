//! 64-block programmable synapse array with leakage cancellation.
//!
//! Each block has four current branches sharing the array-wide biases
//! `wht0!..wht3!`; an input event switches a subset of them on for one pulse
//! width, so a block can source one of 16 weight levels. Off branches still
//! leak. A replica of 16 leak cells (64 branches) copied 4:1 estimates the
//! total dark current, which is subtracted before the shared DPI filter.

use serde::{Deserialize, Serialize};

use crate::dpi::{DpiParams, DpiState};
use crate::error::{Error, Result};
use crate::params::MismatchModel;

pub const N_BLOCKS: usize = 64;
pub const N_BRANCHES: usize = 4;
pub const N_SYNAPSE_BRANCHES: usize = N_BLOCKS * N_BRANCHES;
/// Mismatched devices per array: 256 synapse branches then 64 leak-cell branches.
pub const DEVICES_PER_ARRAY: u64 = 320;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseArrayConfig {
    /// `wht0!..wht3!` in amperes.
    pub branch_bias: [f64; N_BRANCHES],
    /// Off-channel leakage of one branch.
    pub dark_current: f64,
    pub n_leak_cells: usize,
    pub leak_copy_ratio: f64,
    pub pulse_width: f64,
    pub nmda_enabled: bool,
    /// Gate threshold on the target neuron's membrane current.
    pub nmda_threshold: f64,
    pub dpi: DpiParams,
}

impl SynapseArrayConfig {
    pub fn new(branch_bias: [f64; N_BRANCHES], pulse_width: f64, dpi: DpiParams) -> Result<Self> {
        let cfg = Self {
            branch_bias,
            dark_current: 1e-12,
            n_leak_cells: 16,
            leak_copy_ratio: 4.0,
            pulse_width,
            nmda_enabled: false,
            nmda_threshold: 0.0,
            dpi,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self
            .branch_bias
            .iter()
            .any(|b| !(*b >= 0.0 && b.is_finite()))
        {
            return Err(Error::invalid("branch biases must be finite and >= 0"));
        }
        if !(self.pulse_width > 0.0 && self.pulse_width.is_finite()) {
            return Err(Error::invalid(format!(
                "pulse width must be positive, got {}",
                self.pulse_width
            )));
        }
        if !(self.dark_current >= 0.0 && self.dark_current.is_finite()) {
            return Err(Error::invalid("dark current must be >= 0"));
        }
        if self.n_leak_cells * N_BRANCHES == 0 || self.leak_copy_ratio <= 0.0 {
            return Err(Error::invalid("leak replica must be non-empty"));
        }
        if self.nmda_enabled && (self.nmda_threshold.is_nan() || self.nmda_threshold < 0.0) {
            return Err(Error::invalid("NMDA threshold must be >= 0"));
        }
        Ok(())
    }
}

/// Frozen per-device mismatch factors of one array instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseMismatch {
    branch: Vec<f64>,
    leak: Vec<f64>,
}

impl SynapseMismatch {
    pub fn ideal(n_leak_cells: usize) -> Self {
        Self {
            branch: vec![1.0; N_SYNAPSE_BRANCHES],
            leak: vec![1.0; n_leak_cells * N_BRANCHES],
        }
    }

    /// Factors of array number `array_index`; device ids are disjoint across arrays.
    pub fn sample(model: &MismatchModel, array_index: u64, n_leak_cells: usize) -> Self {
        let base = array_index * DEVICES_PER_ARRAY;
        let branch = (0..N_SYNAPSE_BRANCHES as u64)
            .map(|i| model.factor(base + i))
            .collect();
        let leak = (0..(n_leak_cells * N_BRANCHES) as u64)
            .map(|i| model.factor(base + N_SYNAPSE_BRANCHES as u64 + i))
            .collect();
        Self { branch, leak }
    }

    #[inline]
    pub fn branch_factor(&self, block: usize, branch: usize) -> f64 {
        self.branch[block * N_BRANCHES + branch]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivePulse {
    pub mask: u8,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynapseArrayState {
    pub pulses: [Option<ActivePulse>; N_BLOCKS],
    pub dpi: DpiState,
}

impl SynapseArrayState {
    pub fn at_rest(t: f64) -> Self {
        Self {
            pulses: [None; N_BLOCKS],
            dpi: DpiState::at_rest(t),
        }
    }

    pub fn time(&self) -> f64 {
        self.dpi.t_last
    }

    pub fn active_blocks(&self) -> usize {
        self.pulses.iter().flatten().count()
    }
}

/// An array configuration bound to its device mismatch.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseArray {
    pub config: SynapseArrayConfig,
    pub mismatch: SynapseMismatch,
}

fn check_address(block: usize, mask: u8) -> Result<()> {
    if block >= N_BLOCKS {
        return Err(Error::invalid(format!(
            "synapse block {block} out of range 0..64"
        )));
    }
    if mask >= 16 {
        return Err(Error::invalid(format!(
            "branch mask {mask:#x} wider than 4 bits"
        )));
    }
    Ok(())
}

impl SynapseArray {
    pub fn new(config: SynapseArrayConfig, mismatch: SynapseMismatch) -> Result<Self> {
        config.validate()?;
        if mismatch.leak.len() != config.n_leak_cells * N_BRANCHES {
            return Err(Error::invalid(
                "mismatch table does not match leak-cell count",
            ));
        }
        Ok(Self { config, mismatch })
    }

    pub fn ideal(config: SynapseArrayConfig) -> Result<Self> {
        let mm = SynapseMismatch::ideal(config.n_leak_cells);
        Self::new(config, mm)
    }

    /// Sum of the selected branch currents of one block.
    pub fn weight_current(&self, block: usize, mask: u8) -> Result<f64> {
        check_address(block, mask)?;
        Ok(self.weight_unchecked(block, mask))
    }

    fn weight_unchecked(&self, block: usize, mask: u8) -> f64 {
        (0..N_BRANCHES)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| self.config.branch_bias[i] * self.mismatch.branch_factor(block, i))
            .sum()
    }

    /// Dark current of all synapse branches that are not conducting a pulse.
    ///
    /// Factors are summed before scaling by the nominal dark current, so that
    /// with ideal devices this equals [`Self::leak_estimate`] bit for bit.
    pub fn total_dark_current(&self, state: &SynapseArrayState) -> f64 {
        let mut factors = 0.0;
        for block in 0..N_BLOCKS {
            let on = state.pulses[block].map_or(0, |p| p.mask);
            for branch in 0..N_BRANCHES {
                if on & (1 << branch) == 0 {
                    factors += self.mismatch.branch_factor(block, branch);
                }
            }
        }
        self.config.dark_current * factors
    }

    /// Dark current with no pulse active.
    pub fn idle_dark_current(&self) -> f64 {
        self.total_dark_current(&SynapseArrayState::at_rest(0.0))
    }

    /// Replica estimate `I_leak` of the array's dark current.
    pub fn leak_estimate(&self) -> f64 {
        let factors: f64 = self.mismatch.leak.iter().sum();
        self.config.dark_current * (self.config.leak_copy_ratio * factors)
    }

    /// `I_sum`: weighted branch currents plus the dark current of idle branches.
    pub fn summed_current(&self, state: &SynapseArrayState) -> f64 {
        let signal: f64 = state
            .pulses
            .iter()
            .enumerate()
            .filter_map(|(b, p)| p.map(|p| self.weight_unchecked(b, p.mask)))
            .sum();
        signal + self.total_dark_current(state)
    }

    /// `I_wht = max(0, I_sum - I_leak)`, the DPI input.
    pub fn compensated_current(&self, state: &SynapseArrayState) -> f64 {
        (self.summed_current(state) - self.leak_estimate()).max(0.0)
    }

    pub fn advance(&self, state: &SynapseArrayState, t: f64) -> Result<SynapseArrayState> {
        let mut next = state.clone();
        next.dpi = state.dpi.advance(&self.config.dpi, t)?;
        Ok(next)
    }

    /// Open (or extend) a pulse on `block`. Returns the new state and the pulse end time.
    ///
    /// A block already pulsing keeps a single gate: its end time moves to the
    /// later of the two, and the masks are merged.
    pub fn apply_input_event(
        &self,
        state: &SynapseArrayState,
        t: f64,
        block: usize,
        mask: u8,
    ) -> Result<(SynapseArrayState, f64)> {
        check_address(block, mask)?;
        let mut next = self.advance(state, t)?;
        let end = t + self.config.pulse_width;
        let pulse = match next.pulses[block] {
            Some(p) if p.end > t => ActivePulse {
                mask: p.mask | mask,
                end: p.end.max(end),
            },
            _ => ActivePulse { mask, end },
        };
        next.pulses[block] = Some(pulse);
        let i_in = self.compensated_current(&next);
        next.dpi = next.dpi.set_input(&self.config.dpi, t, i_in)?;
        Ok((next, pulse.end))
    }

    /// Close the pulse on `block` if it ends exactly at `t`. A pulse that was
    /// extended past `t` is left alone and `false` is returned.
    pub fn end_pulse(
        &self,
        state: &SynapseArrayState,
        t: f64,
        block: usize,
    ) -> Result<(SynapseArrayState, bool)> {
        check_address(block, 0)?;
        let mut next = self.advance(state, t)?;
        match next.pulses[block] {
            Some(p) if p.end == t => {
                next.pulses[block] = None;
                let i_in = self.compensated_current(&next);
                next.dpi = next.dpi.set_input(&self.config.dpi, t, i_in)?;
                Ok((next, true))
            }
            _ => Ok((next, false)),
        }
    }

    /// Initial state with the DPI input set to the idle residual leak.
    pub fn rest_state(&self, t: f64) -> SynapseArrayState {
        let mut s = SynapseArrayState::at_rest(t);
        s.dpi.i_in = self.compensated_current(&s);
        s
    }

    /// Synaptic current delivered to the neuron, after the NMDA gate.
    pub fn synaptic_output(
        &self,
        state: &SynapseArrayState,
        t: f64,
        i_mem_of_target: f64,
    ) -> Result<f64> {
        if t < state.time() {
            return Err(Error::TimeReversal {
                from: state.time(),
                to: t,
            });
        }
        let i_syn = state.dpi.value_at(&self.config.dpi, t);
        if !self.config.nmda_enabled || i_mem_of_target >= self.config.nmda_threshold {
            Ok(i_syn)
        } else {
            Ok(0.0)
        }
    }
}
