#![allow(dead_code)]

pub mod reference;

use nmsim::engine::NeuronUnitConfig;
use nmsim::synapse::{N_BLOCKS, N_BRANCHES};
use reference::{Filter, RefModel};

/// Reference model of a unit driven on one block with one mask, ideal devices.
pub fn reference_for(unit: &NeuronUnitConfig, mask: u8) -> RefModel {
    let s = &unit.synapse;
    let n = &unit.neuron;
    let on = (0..N_BRANCHES).filter(|i| mask & (1 << i) != 0);
    let weight: f64 = on.clone().map(|i| s.branch_bias[i]).sum();
    let n_on = on.count() as f64;
    let all = (N_BLOCKS * N_BRANCHES) as f64;
    let leak = s.dark_current * s.leak_copy_ratio * (s.n_leak_cells * N_BRANCHES) as f64;
    let idle = (s.dark_current * all - leak).max(0.0);
    let pulse = (weight + s.dark_current * (all - n_on) - leak).max(0.0);
    RefModel {
        syn: Filter {
            tau: s.dpi.tau,
            gain: s.dpi.gain,
        },
        mem: Filter {
            tau: n.mem.tau,
            gain: n.mem.gain,
        },
        ahp: Filter {
            tau: n.ahp.tau,
            gain: n.ahp.gain,
        },
        i_ref: n.i_ref,
        t_ref: n.t_ref,
        ahp_width: n.ahp_pulse_width,
        ahp_amp: n.ahp_pulse_amp,
        i_const: n.i_const,
        pulse_current: pulse,
        idle_current: idle,
        pulse_width: s.pulse_width,
    }
}

/// Largest relative deviation of `got` from `want`, normalized by the peak
/// of `want`, skipping samples within `guard` of any spike time.
pub fn max_rel_dev(got: &[(f64, f64)], want: &[(f64, f64)], spikes: &[f64], guard: f64) -> f64 {
    let peak = want.iter().map(|w| w.1.abs()).fold(0.0, f64::max);
    if peak == 0.0 {
        return got.iter().map(|g| g.1.abs()).fold(0.0, f64::max);
    }
    got.iter()
        .zip(want)
        .filter(|(g, _)| spikes.iter().all(|s| (g.0 - s).abs() > guard))
        .map(|(g, w)| (g.1 - w.1).abs() / peak)
        .fold(0.0, f64::max)
}
