//! Current-mode integrate-and-fire neuron.
//!
//! The membrane is a DPI driven by `max(0, I_syn + I_const - I_ahp)`; the AHP
//! is a second DPI fed by a fixed pulse per spike. A comparator against
//! `I_ref` fires the neuron, after which the membrane is held at zero for the
//! refractory period.
//!
//! Between events the synaptic and AHP currents are single exponentials, so
//! the membrane is a sum of exponentials too. [`NeuronState::advance`] walks
//! the interval in segments split at the points where the input clamp or the
//! NMDA gate switches, and each segment is evaluated in closed form.

use serde::{Deserialize, Serialize};

use crate::aer::AerEvent;
use crate::dpi::{DpiParams, DpiState};
use crate::error::{Error, Result};
use crate::expsum::{first_order_response, ExpSum};

/// Comparator tolerance on `I_mem >= I_ref`.
pub const SPIKE_TOLERANCE: f64 = 1e-15;
/// Hysteresis on the input clamp switch.
const CLAMP_HYSTERESIS: f64 = 1e-21;
/// Hysteresis on the NMDA gate switch.
const GATE_HYSTERESIS: f64 = 1e-18;
const MAX_SEGMENTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronConfig {
    pub mem: DpiParams,
    /// Spiking threshold.
    pub i_ref: f64,
    /// Refractory period in seconds.
    pub t_ref: f64,
    pub ahp: DpiParams,
    pub ahp_pulse_width: f64,
    pub ahp_pulse_amp: f64,
    /// Constant injected current.
    pub i_const: f64,
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.i_ref > 0.0 && self.i_ref.is_finite()) {
            return Err(Error::invalid(format!(
                "I_ref must be positive, got {}",
                self.i_ref
            )));
        }
        if !(self.t_ref >= 0.0 && self.t_ref.is_finite()) {
            return Err(Error::invalid(format!(
                "t_ref must be >= 0, got {}",
                self.t_ref
            )));
        }
        if !(self.ahp_pulse_width > 0.0 && self.ahp_pulse_width.is_finite()) {
            return Err(Error::invalid("AHP pulse width must be positive"));
        }
        for (name, v) in [
            ("AHP amplitude", self.ahp_pulse_amp),
            ("I_const", self.i_const),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn ahp_enabled(&self) -> bool {
        self.ahp_pulse_amp > 0.0 && self.ahp.gain > 0.0
    }
}

/// Synaptic current trajectory `i(s) = target + (now - target) exp(-s / tau)`,
/// with `s` measured from the neuron's present time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapticDrive {
    pub now: f64,
    pub target: f64,
    pub tau: f64,
}

impl SynapticDrive {
    pub fn constant(i: f64) -> Self {
        Self {
            now: i,
            target: i,
            tau: f64::INFINITY,
        }
    }

    pub fn from_dpi(state: &DpiState, params: &DpiParams) -> Self {
        Self {
            now: state.i_out,
            target: state.target(params),
            tau: params.tau,
        }
    }

    pub fn at(&self, s: f64) -> f64 {
        if self.now == self.target || s == 0.0 {
            return self.now;
        }
        self.target + (self.now - self.target) * (-s / self.tau).exp()
    }

    fn shifted(&self, s: f64) -> Self {
        Self {
            now: self.at(s),
            ..*self
        }
    }

    fn expsum(&self) -> ExpSum {
        let mut f = ExpSum::constant(self.target);
        if self.now != self.target {
            f.push(1.0 / self.tau, self.now - self.target, 0.0);
        }
        f
    }
}

fn dpi_expsum(state: &DpiState, params: &DpiParams) -> ExpSum {
    SynapticDrive::from_dpi(state, params).expsum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronState {
    /// Membrane filter; `i_out` is `I_mem`, `t_last` the neuron's clock.
    pub mem: DpiState,
    pub ahp: DpiState,
    /// AHP pulses currently on.
    pub ahp_active: u32,
    pub refractory_until: Option<f64>,
    pub spike_count: u64,
    pub last_spike_time: Option<f64>,
    /// Effective input is held at zero (`I_syn + I_const < I_ahp`).
    pub clamped: bool,
    /// NMDA gate state.
    pub gate_open: bool,
}

impl NeuronState {
    pub fn at_rest(t: f64) -> Self {
        Self {
            mem: DpiState::at_rest(t),
            ahp: DpiState::at_rest(t),
            ahp_active: 0,
            refractory_until: None,
            spike_count: 0,
            last_spike_time: None,
            clamped: false,
            gate_open: false,
        }
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.mem.t_last
    }

    #[inline]
    pub fn i_mem(&self) -> f64 {
        self.mem.i_out
    }

    #[inline]
    pub fn i_ahp(&self) -> f64 {
        self.ahp.i_out
    }

    pub fn in_refractory(&self) -> bool {
        self.refractory_until.is_some_and(|r| self.time() < r)
    }

    /// `max(0, i_syn + i_const - i_ahp)`.
    pub fn effective_input(&self, config: &NeuronConfig, i_syn: f64) -> f64 {
        (i_syn + config.i_const - self.i_ahp()).max(0.0)
    }

    /// Advance to `t` under `drive`, which must be referenced to the neuron's present time.
    ///
    /// `nmda_threshold` enables the gate on the synaptic drive.
    pub fn advance(
        &mut self,
        config: &NeuronConfig,
        drive: &SynapticDrive,
        nmda_threshold: Option<f64>,
        t: f64,
    ) -> Result<()> {
        self.evolve(config, drive, nmda_threshold, t, false)
            .map(|_| ())
    }

    /// Predicted spike time in `[now, horizon]`; never earlier than the end of
    /// the refractory period.
    pub fn schedule_spike(
        &self,
        config: &NeuronConfig,
        drive: &SynapticDrive,
        nmda_threshold: Option<f64>,
        horizon: f64,
    ) -> Result<Option<f64>> {
        if horizon < self.time() {
            return Ok(None);
        }
        self.clone()
            .evolve(config, drive, nmda_threshold, horizon, true)
    }

    fn evolve(
        &mut self,
        cfg: &NeuronConfig,
        drive: &SynapticDrive,
        nmda_threshold: Option<f64>,
        t1: f64,
        stop_at_spike: bool,
    ) -> Result<Option<f64>> {
        if t1 < self.time() {
            return Err(Error::TimeReversal {
                from: self.time(),
                to: t1,
            });
        }
        let mut drive = *drive;
        for _ in 0..MAX_SEGMENTS {
            let t0 = self.time();
            let refractory = self.in_refractory();
            if stop_at_spike && !refractory && self.i_mem() >= cfg.i_ref - SPIKE_TOLERANCE {
                return Ok(Some(t0));
            }
            if t0 >= t1 {
                return Ok(None);
            }
            let span = t1 - t0;

            if refractory {
                let until = self.refractory_until.unwrap_or(t0);
                let t_end = until.min(t1);
                self.ahp = self.ahp.advance(&cfg.ahp, t_end)?;
                self.mem = DpiState {
                    i_out: 0.0,
                    t_last: t_end,
                    i_in: 0.0,
                };
                drive = drive.shifted(t_end - t0);
                continue;
            }

            let ahp = dpi_expsum(&self.ahp, &cfg.ahp);
            let syn = if nmda_threshold.is_none() || self.gate_open {
                drive.expsum()
            } else {
                ExpSum::zero()
            };
            let u = syn.add_const(cfg.i_const).add(&ahp.clone().scale(-1.0));
            let mem = if self.clamped {
                first_order_response(self.i_mem(), &ExpSum::zero(), cfg.mem.gain, cfg.mem.tau)
            } else {
                first_order_response(self.i_mem(), &u, cfg.mem.gain, cfg.mem.tau)
            };

            if !(u.is_finite() && mem.is_finite()) {
                return Err(Error::NumericFault {
                    entity: "membrane".into(),
                    time: t0,
                    detail: format!(
                        "non-finite membrane solution, I_syn target = {}",
                        drive.target
                    ),
                });
            }

            let s_clamp = if self.clamped {
                u.first_nonnegative(span)
            } else {
                u.clone()
                    .scale(-1.0)
                    .add_const(-CLAMP_HYSTERESIS)
                    .first_nonnegative(span)
            };
            let s_gate = nmda_threshold.and_then(|th| {
                if self.gate_open {
                    mem.clone()
                        .scale(-1.0)
                        .add_const(th - GATE_HYSTERESIS)
                        .first_nonnegative(span)
                } else {
                    mem.clone().add_const(-th).first_nonnegative(span)
                }
            });
            let s_spike = if stop_at_spike {
                mem.clone().add_const(-cfg.i_ref).first_nonnegative(span)
            } else {
                None
            };

            let s = [s_clamp, s_gate, s_spike]
                .into_iter()
                .flatten()
                .fold(span, f64::min);
            let t_new = if s >= span { t1 } else { t0 + s };
            let i_mem = mem.eval(s).max(0.0);
            if !i_mem.is_finite() {
                return Err(Error::NumericFault {
                    entity: "membrane".into(),
                    time: t_new,
                    detail: format!("I_mem = {i_mem}"),
                });
            }
            let i_in_now = if self.clamped {
                0.0
            } else {
                u.eval(s).max(0.0)
            };
            self.mem = DpiState {
                i_out: i_mem,
                t_last: t_new,
                i_in: i_in_now,
            };
            self.ahp = self.ahp.advance(&cfg.ahp, t_new)?;
            drive = drive.shifted(s);

            if s_clamp == Some(s) {
                self.clamped = !self.clamped;
            }
            if s_gate == Some(s) {
                self.gate_open = !self.gate_open;
            }
            if s_spike == Some(s) {
                return Ok(Some(t_new));
            }
        }
        Err(Error::NumericFault {
            entity: "membrane".into(),
            time: self.time(),
            detail: "segment limit exceeded (chattering switch)".into(),
        })
    }

    /// Emit a spike at `t`: reset, enter refractory, kick the AHP.
    pub fn fire(&mut self, config: &NeuronConfig, t: f64, address: u32) -> Result<AerEvent> {
        if t != self.time() {
            return Err(Error::ContractViolation(format!(
                "fire at {t} s but neuron is at {} s",
                self.time()
            )));
        }
        if self.in_refractory() {
            return Err(Error::ContractViolation(format!(
                "fire during refractory period at {t} s"
            )));
        }
        if self.i_mem() < config.i_ref - SPIKE_TOLERANCE {
            return Err(Error::ContractViolation(format!(
                "fire below threshold: I_mem = {} A < I_ref = {} A",
                self.i_mem(),
                config.i_ref
            )));
        }
        self.mem = DpiState::at_rest(t);
        self.refractory_until = Some(t + config.t_ref);
        self.ahp_active += 1;
        self.ahp = self.ahp.set_input(
            &config.ahp,
            t,
            self.ahp_active as f64 * config.ahp_pulse_amp,
        )?;
        self.spike_count += 1;
        self.last_spike_time = Some(t);
        AerEvent::new(t, address)
    }

    /// One AHP pulse ends at `t` (the neuron must already be at `t`).
    pub fn end_ahp_pulse(&mut self, config: &NeuronConfig, t: f64) -> Result<()> {
        if self.ahp_active == 0 {
            return Err(Error::ContractViolation(
                "AHP pulse end without an active pulse".into(),
            ));
        }
        self.ahp_active -= 1;
        self.ahp = self.ahp.set_input(
            &config.ahp,
            t,
            self.ahp_active as f64 * config.ahp_pulse_amp,
        )?;
        Ok(())
    }
}

/// Analytic firing rate for constant drive with the AHP off.
pub fn steady_rate_oracle(config: &NeuronConfig, i_drive: f64) -> f64 {
    let i_ss = config.mem.gain * (i_drive + config.i_const);
    if i_ss <= config.i_ref {
        return 0.0;
    }
    1.0 / (config.t_ref + config.mem.tau * (i_ss / (i_ss - config.i_ref)).ln())
}
