mod common;

use nmsim::aer::{encode_input, AerEvent, InputAddress, OutputAddress, RouterTable};
use nmsim::engine::{run, CoreConfig, NeuronUnitConfig, SimConfig, SimResult, Simulation};
use nmsim::harness::presets::trace_unit;
use nmsim::harness::Biases;

fn input(t: f64, block: u8, mask: u8) -> AerEvent {
    AerEvent::new(t, encode_input(0, block, mask).unwrap()).unwrap()
}

fn mean_syn(res: &SimResult, core: u8, from: f64) -> f64 {
    let tr: Vec<f64> = res
        .trace(core, 0)
        .iter()
        .filter(|s| s.time >= from)
        .map(|s| s.i_syn)
        .collect();
    tr.iter().sum::<f64>() / tr.len() as f64
}

/// Neuron fed only by `I_const`, firing regularly.
fn pacemaker(i_const: f64) -> NeuronUnitConfig {
    let mut b = Biases::trace_defaults();
    b.ahp_amp = 0.0;
    b.i_const = i_const;
    b.unit(200e-6).unwrap()
}

#[test]
fn quiescent_without_input() {
    let cfg = SimConfig::single_unit(trace_unit().unwrap(), 0.2, Some(1e-3));
    let res = run(&cfg, &[]).unwrap();
    assert!(res.spikes.is_empty());
    assert!(res.traces.iter().all(|s| s.i_syn == 0.0 && s.i_mem == 0.0));
    assert_eq!(res.stats.events_processed, res.stats.record_samples);
    assert_eq!(res.stats.record_samples, 201);
}

#[test]
fn event_counts_are_conserved() {
    let cfg = SimConfig::single_unit(trace_unit().unwrap(), 0.5, None);
    let events: Vec<_> = (0..40)
        .map(|k| input(k as f64 * 0.01, (k % 3) as u8, 1))
        .collect();
    let res = run(&cfg, &events).unwrap();
    assert!(res.stats.spikes > 0);
    assert_eq!(res.stats.input_spikes, 40);
    assert_eq!(res.stats.pulse_ends, 40);
    assert_eq!(res.stats.refractory_ends, res.stats.spikes);
    assert_eq!(res.stats.ahp_pulse_ends, res.stats.spikes);
    assert_eq!(res.spikes.len() as u64, res.stats.spikes);
    assert!(res.spikes.windows(2).all(|w| w[0].time < w[1].time));
}

#[test]
fn unit_matches_reference_on_a_dense_train() {
    // 1 kHz of 200 µs pulses, with adaptation and the input clamp active
    let unit = trace_unit().unwrap();
    let t_end = 0.12;
    let starts: Vec<f64> = (0..120).map(|k| k as f64 * 1e-3).collect();
    let events: Vec<_> = starts.iter().map(|&t| input(t, 5, 1)).collect();
    let cfg = SimConfig::single_unit(unit.clone(), t_end, Some(0.5e-3));
    let res = run(&cfg, &events).unwrap();
    let reference = common::reference_for(&unit, 1).run(&starts, t_end, 0.1e-6, 0.5e-3);
    assert_eq!(res.spikes.len(), reference.spikes.len());
    assert!(res.spikes.len() > 5);
    for (a, b) in res.spikes.iter().zip(&reference.spikes) {
        assert!((a.time - b).abs() < 1e-6, "{} vs {}", a.time, b);
    }
    let mem: Vec<_> = res.traces.iter().map(|s| (s.time, s.i_mem)).collect();
    let rmem: Vec<_> = reference.samples.iter().map(|s| (s.0, s.2)).collect();
    assert!(common::max_rel_dev(&mem, &rmem, &reference.spikes, 1e-6) < 1e-4);
}

#[test]
fn back_to_back_pulses_equal_one_long_pulse() {
    // a pulse end and a fresh input on the same block at the same instant
    let short = trace_unit().unwrap();
    let mut long = short.clone();
    long.synapse.pulse_width = 2.0 * short.synapse.pulse_width;
    let w = short.synapse.pulse_width;
    let a = run(
        &SimConfig::single_unit(short, 0.01, Some(1e-4)),
        &[input(1e-3, 0, 1), input(1e-3 + w, 0, 1)],
    )
    .unwrap();
    let b = run(
        &SimConfig::single_unit(long, 0.01, Some(1e-4)),
        &[input(1e-3, 0, 1)],
    )
    .unwrap();
    for (x, y) in a.traces.iter().zip(&b.traces) {
        assert!((x.i_syn - y.i_syn).abs() <= 1e-12 * y.i_syn.abs().max(1e-18));
    }
    assert_eq!(a.stats.stale_pulse_ends, 0);
}

#[test]
fn retrigger_extends_and_leaves_stale_pulse_end() {
    let unit = trace_unit().unwrap();
    let w = unit.synapse.pulse_width;
    let res = run(
        &SimConfig::single_unit(unit, 0.01, None),
        &[input(1e-3, 0, 1), input(1e-3 + 0.5 * w, 0, 2)],
    )
    .unwrap();
    assert_eq!(res.stats.pulse_ends, 2);
    assert_eq!(res.stats.stale_pulse_ends, 1);
}

#[test]
fn input_invalidates_pending_prediction() {
    // the pacemaker has a prediction queued; an input moves the crossing earlier
    let unit = pacemaker(1.5e-9);
    let cfg = SimConfig::single_unit(unit, 0.05, None);
    let alone = run(&cfg, &[]).unwrap();
    let first = alone.spikes[0].time;
    let kicked = run(&cfg, &[input(0.5 * first, 0, 1)]).unwrap();
    assert!(kicked.spikes[0].time < first);
    assert!(kicked.stats.stale_predictions >= 1);
    // every stale entry is one that was superseded, never fired
    assert_eq!(kicked.spikes.len() as u64, kicked.stats.spikes);
}

#[test]
fn manual_invalidation_is_harmless() {
    let cfg = SimConfig::single_unit(pacemaker(1.5e-9), 0.05, None);
    let reference = run(&cfg, &[]).unwrap();
    let mut sim = Simulation::new(&cfg).unwrap();
    sim.invalidate_prediction(0, 0).unwrap();
    sim.invalidate_prediction(0, 0).unwrap();
    let res = sim.finish().unwrap();
    assert_eq!(res.spikes, reference.spikes);
    assert_eq!(
        res.stats.stale_predictions,
        reference.stats.stale_predictions + 2
    );
}

fn two_core(fan_out: &[u8], latency: f64, t_end: f64) -> SimConfig {
    let mut table = RouterTable::new();
    for &block in fan_out {
        table
            .connect(
                OutputAddress { core: 0, neuron: 0 },
                InputAddress {
                    core: 1,
                    block,
                    mask: 1,
                },
            )
            .unwrap();
    }
    SimConfig {
        t_end,
        record_dt: Some(0.5e-3),
        cores: vec![
            CoreConfig {
                id: 0,
                units: vec![pacemaker(1.5e-9)],
            },
            CoreConfig {
                id: 1,
                units: vec![trace_unit().unwrap()],
            },
        ],
        router: table,
        hs_latency: latency,
        mismatch_sigma: 0.0,
        seed: 0,
    }
}

#[test]
fn doubling_fan_out_doubles_mean_synaptic_current() {
    let one = run(&two_core(&[0], 1e-6, 0.3), &[]).unwrap();
    let two = run(&two_core(&[0, 1], 1e-6, 0.3), &[]).unwrap();
    assert_eq!(one.spike_times(0, 0), two.spike_times(0, 0));
    assert!(one.stats.routed_deliveries > 10);
    assert_eq!(two.stats.routed_deliveries, 2 * one.stats.routed_deliveries);
    let (a, b) = (mean_syn(&one, 1, 0.0), mean_syn(&two, 1, 0.0));
    assert!((b / a - 2.0).abs() < 1e-9, "ratio {}", b / a);
}

#[test]
fn routed_delivery_equals_external_input_at_arrival_time() {
    let latency = 2e-6;
    let routed = run(&two_core(&[3], latency, 0.1), &[]).unwrap();
    let sources = routed.spike_times(0, 0);
    // same target neuron, fed directly with inputs at the arrival times
    let cfg = SimConfig::single_unit(trace_unit().unwrap(), 0.1, Some(0.5e-3));
    let direct_events: Vec<_> = sources.iter().map(|&t| input(t + latency, 3, 1)).collect();
    let direct = run(&cfg, &direct_events).unwrap();
    let target = routed.spike_times(1, 0);
    assert!(!target.is_empty());
    assert_eq!(target, direct.spike_times(0, 0));
    assert!(target[0] > sources[0] + latency);
}

#[test]
fn mismatch_is_seeded() {
    let mut cfg = SimConfig::single_unit(trace_unit().unwrap(), 0.1, Some(1e-3));
    cfg.mismatch_sigma = 0.05;
    let events: Vec<_> = (0..10).map(|k| input(k as f64 * 0.01, 0, 1)).collect();
    let a = run(&cfg, &events).unwrap();
    let b = run(&cfg, &events).unwrap();
    cfg.seed = 1;
    let c = run(&cfg, &events).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.traces, c.traces);
}

#[test]
fn csv_outputs_are_sorted() {
    let cfg = SimConfig::single_unit(trace_unit().unwrap(), 0.1, Some(1e-3));
    let events: Vec<_> = (0..10).map(|k| input(k as f64 * 0.01, 0, 1)).collect();
    let res = run(&cfg, &events).unwrap();
    let csv = res.traces_csv();
    let times: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
    assert!(res.spikes_csv().starts_with("time,core,neuron\n"));
    let out = res.output_events();
    assert_eq!(out.len(), res.spikes.len());
}
