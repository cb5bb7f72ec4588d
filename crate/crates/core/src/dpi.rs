//! Current-mode first-order low-pass filter (differential pair integrator).
//!
//! Linear-regime model: `tau * dI_out/dt + I_out = (I_thr / I_tau) * I_in`,
//! with `tau = C * U_T / (kappa * I_tau)`. Inputs are piecewise constant, so
//! every update is the exact closed-form solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{bias_for_tau, tau_from_bias, CurrentValue, PhysicalConstants};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpiParams {
    /// Capacitance in farads.
    pub cap: f64,
    /// Time-constant bias in amperes.
    pub i_tau: f64,
    /// Gain bias in amperes.
    pub i_thr: f64,
    /// Derived time constant in seconds.
    pub tau: f64,
    /// Derived gain `i_thr / i_tau`.
    pub gain: f64,
}

impl DpiParams {
    pub fn new(cap: f64, i_tau: f64, i_thr: f64, consts: &PhysicalConstants) -> Result<Self> {
        let tau = tau_from_bias(cap, CurrentValue::new(i_tau)?, consts)?;
        let i_thr = CurrentValue::new(i_thr)?.amps();
        Ok(Self {
            cap,
            i_tau,
            i_thr,
            tau,
            gain: i_thr / i_tau,
        })
    }

    /// Build from a target time constant and gain; the biases are back-computed.
    pub fn with_tau(cap: f64, tau: f64, gain: f64, consts: &PhysicalConstants) -> Result<Self> {
        if !(gain >= 0.0 && gain.is_finite()) {
            return Err(Error::invalid(format!("gain must be >= 0, got {gain}")));
        }
        let i_tau = bias_for_tau(cap, tau, consts)?.amps();
        Ok(Self {
            cap,
            i_tau,
            i_thr: gain * i_tau,
            tau,
            gain,
        })
    }

    /// Same filter with the gain bias scaled by `factor`.
    pub fn scale_thr(&self, factor: f64) -> Self {
        Self {
            i_thr: self.i_thr * factor,
            gain: self.gain * factor,
            ..*self
        }
    }
}

/// Steady-state output for a constant input.
#[inline]
pub fn steady_state(params: &DpiParams, i_in: f64) -> f64 {
    params.gain * i_in
}

/// Result of a threshold-crossing prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Crossing {
    /// Output is already at or above the threshold at `t_last`.
    AlreadyAbove,
    /// Output reaches the threshold at this absolute time.
    At(f64),
    /// Output never reaches the threshold under the current input.
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DpiState {
    pub i_out: f64,
    pub t_last: f64,
    pub i_in: f64,
}

impl DpiState {
    pub fn at_rest(t: f64) -> Self {
        Self {
            i_out: 0.0,
            t_last: t,
            i_in: 0.0,
        }
    }

    /// Current steady-state target under the applied input.
    #[inline]
    pub fn target(&self, params: &DpiParams) -> f64 {
        steady_state(params, self.i_in)
    }

    /// Output at `t` without mutating the state.
    #[inline]
    pub fn value_at(&self, params: &DpiParams, t: f64) -> f64 {
        let dt = t - self.t_last;
        if dt == 0.0 {
            return self.i_out;
        }
        let ss = self.target(params);
        ss + (self.i_out - ss) * (-dt / params.tau).exp()
    }

    pub fn advance(&self, params: &DpiParams, t: f64) -> Result<Self> {
        if t < self.t_last {
            return Err(Error::TimeReversal {
                from: self.t_last,
                to: t,
            });
        }
        Ok(Self {
            i_out: self.value_at(params, t),
            t_last: t,
            i_in: self.i_in,
        })
    }

    /// Advance to `t`, then replace the input. The output is continuous across the edge.
    pub fn set_input(&self, params: &DpiParams, t: f64, i_in: f64) -> Result<Self> {
        if !(i_in >= 0.0 && i_in.is_finite()) {
            return Err(Error::invalid(format!(
                "input current must be >= 0, got {i_in}"
            )));
        }
        let mut next = self.advance(params, t)?;
        next.i_in = i_in;
        Ok(next)
    }

    /// Earliest time the output reaches `threshold` under the present input.
    pub fn crossing_time(&self, params: &DpiParams, threshold: f64) -> Crossing {
        if self.i_out >= threshold {
            return Crossing::AlreadyAbove;
        }
        let ss = self.target(params);
        if ss <= threshold {
            return Crossing::Never;
        }
        Crossing::At(self.t_last + params.tau * ((ss - self.i_out) / (ss - threshold)).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(tau: f64, gain: f64) -> DpiParams {
        DpiParams::with_tau(1e-12, tau, gain, &PhysicalConstants::default()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn steady_state_examples() {
        let k = PhysicalConstants::default();
        assert_eq!(steady_state(&params(1e-3, 1.0), 10e-9), 10e-9);
        let p = DpiParams::new(1e-12, 5e-12, 40e-12, &k).unwrap();
        assert!(rel(steady_state(&p, 0.2e-9), 1.6e-9) < 1e-14);
        assert_eq!(steady_state(&p, 0.0), 0.0);
    }

    #[test]
    fn derived_params_match_bias_law() {
        let k = PhysicalConstants::default();
        let p = DpiParams::new(1e-12, 5e-12, 40e-12, &k).unwrap();
        assert!((p.tau - 7.386e-3).abs() < 5e-7);
        assert_eq!(p.gain, 8.0);
        assert_eq!(
            DpiParams::new(1e-12, 0.0, 1e-12, &k),
            Err(Error::InfiniteTimeConstant)
        );
    }

    #[test]
    fn advance_decay_one_tau() {
        let p = params(10e-3, 1.0);
        let s = DpiState {
            i_out: 10e-9,
            t_last: 0.0,
            i_in: 0.0,
        };
        let n = s.advance(&p, 10e-3).unwrap();
        assert!((n.i_out - 3.6788e-9).abs() < 1e-13);
        assert_eq!(s.advance(&p, 0.0).unwrap().i_out, 10e-9);
    }

    #[test]
    fn advance_converges_to_steady_state() {
        let k = PhysicalConstants::default();
        let p = DpiParams::new(1e-12, 5e-12, 40e-12, &k).unwrap();
        let s = DpiState {
            i_out: 0.0,
            t_last: 0.0,
            i_in: 0.2e-9,
        };
        let n = s.advance(&p, 50.0 * p.tau).unwrap();
        assert!(rel(n.i_out, 1.6e-9) < 1e-12);
    }

    #[test]
    fn advance_rejects_time_reversal() {
        let p = params(1e-3, 1.0);
        let s = DpiState::at_rest(1.0);
        assert!(matches!(
            s.advance(&p, 0.5),
            Err(Error::TimeReversal { .. })
        ));
        assert!(s.set_input(&p, 0.5, 1e-9).is_err());
        assert!(s.set_input(&p, 1.0, -1e-9).is_err());
    }

    #[test]
    fn pulse_charge_and_release() {
        let k = PhysicalConstants::default();
        let p = DpiParams::new(1e-12, 5e-12, 40e-12, &k).unwrap();
        let on = DpiState::at_rest(0.0).set_input(&p, 0.0, 10e-9).unwrap();
        let at_w = on.advance(&p, 200e-6).unwrap();
        // 80 nA * (1 - exp(-0.2 / 7.386))
        assert!((at_w.i_out - 2.137e-9).abs() < 1e-12, "{}", at_w.i_out);
        let off = at_w.set_input(&p, 200e-6, 0.0).unwrap();
        let later = off.advance(&p, 200e-6 + 20.0 * p.tau).unwrap();
        assert!(later.i_out < at_w.i_out * 1e-8);
    }

    #[test]
    fn set_input_idempotent() {
        let p = params(5e-3, 2.0);
        let s = DpiState::at_rest(0.0).set_input(&p, 0.0, 3e-9).unwrap();
        let a = s.set_input(&p, 1e-3, 5e-9).unwrap();
        let b = a.set_input(&p, 1e-3, 5e-9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crossing_examples() {
        let p = params(5e-3, 1.0);
        let s = DpiState {
            i_out: 0.0,
            t_last: 0.0,
            i_in: 40e-9,
        };
        match s.crossing_time(&p, 20e-9) {
            Crossing::At(t) => assert!((t - 3.4657e-3).abs() < 1e-7, "{t}"),
            other => panic!("{other:?}"),
        }
        let weak = DpiState { i_in: 10e-9, ..s };
        assert_eq!(weak.crossing_time(&p, 20e-9), Crossing::Never);
        let above = DpiState { i_out: 25e-9, ..s };
        assert_eq!(above.crossing_time(&p, 20e-9), Crossing::AlreadyAbove);
    }

    #[test]
    fn crossing_agrees_with_bisection() {
        let p = params(7e-3, 3.0);
        let s = DpiState {
            i_out: 2e-9,
            t_last: 0.25,
            i_in: 9e-9,
        };
        let Crossing::At(t_star) = s.crossing_time(&p, 20e-9) else {
            panic!("expected a crossing")
        };
        let (mut lo, mut hi) = (0.25, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s.value_at(&p, mid) >= 20e-9 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!((t_star - hi).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn semigroup(i0 in 0.0f64..1e-7, iin in 0.0f64..1e-7, tau in 1e-4f64..1e-1,
                     splits in proptest::collection::vec(0.0f64..1.0, 1..8), total in 0.0f64..0.5) {
            let p = params(tau, 1.5);
            let s = DpiState { i_out: i0, t_last: 0.0, i_in: iin };
            let one = s.advance(&p, total).unwrap();
            let mut cuts: Vec<f64> = splits.iter().map(|f| f * total).collect();
            cuts.sort_by(f64::total_cmp);
            let mut many = s;
            for c in cuts { many = many.advance(&p, c).unwrap(); }
            many = many.advance(&p, total).unwrap();
            let scale = one.i_out.abs().max(1e-30);
            prop_assert!((one.i_out - many.i_out).abs() / scale < 1e-12);
        }

        #[test]
        fn superposition(a in 0.0f64..1e-7, b in 0.0f64..1e-7, tau in 1e-4f64..1e-1, t in 0.0f64..0.3) {
            let p = params(tau, 4.0);
            let resp = |i: f64| DpiState::at_rest(0.0).set_input(&p, 0.0, i).unwrap().advance(&p, t).unwrap().i_out;
            let sum = resp(a) + resp(b);
            let both = resp(a + b);
            prop_assert!((both - sum).abs() <= 1e-12 * both.abs().max(1e-30));
        }

        #[test]
        fn output_non_negative(i0 in 0.0f64..1e-7, iin in 0.0f64..1e-7, dt in 0.0f64..1.0) {
            let p = params(3e-3, 2.0);
            let s = DpiState { i_out: i0, t_last: 0.0, i_in: iin };
            prop_assert!(s.advance(&p, dt).unwrap().i_out >= 0.0);
        }
    }
}
