//! Deterministic discrete-event simulation kernel.
//!
//! One global virtual clock; a min-heap of [`SimEvent`]s ordered by
//! `(time, kind, core, unit, sequence)`. All state changes are closed-form
//! advances to event times. Spike predictions are invalidated lazily: each
//! unit carries a generation counter, and a popped prediction whose
//! generation is older than the unit's is discarded.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aer::{decode_input, encode_output, AerEvent, RouteStats, Router, RouterTable};
use crate::error::{Error, Result};
use crate::neuron::{NeuronConfig, NeuronState, SynapticDrive};
use crate::params::MismatchModel;
use crate::synapse::{SynapseArray, SynapseArrayConfig, SynapseArrayState, SynapseMismatch};

/// Event kinds in tie-break order for simultaneous events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    PulseEnd,
    AhpPulseEnd,
    InputSpike,
    RoutedDelivery,
    PredictedCrossing,
    RefractoryEnd,
    RecordSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub core: usize,
    pub unit: usize,
    pub block: u8,
    pub mask: u8,
    pub generation: u64,
    pub sequence: u64,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.core.cmp(&other.core))
            .then(self.unit.cmp(&other.unit))
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One neuron with its private synapse array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronUnitConfig {
    pub synapse: SynapseArrayConfig,
    pub neuron: NeuronConfig,
}

/// An input event addressed to a core reaches every unit of that core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreConfig {
    pub id: u8,
    pub units: Vec<NeuronUnitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub t_end: f64,
    /// Trace sampling period; `None` disables trace recording.
    pub record_dt: Option<f64>,
    pub cores: Vec<CoreConfig>,
    pub router: RouterTable,
    pub hs_latency: f64,
    pub mismatch_sigma: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn single_unit(unit: NeuronUnitConfig, t_end: f64, record_dt: Option<f64>) -> Self {
        Self {
            t_end,
            record_dt,
            cores: vec![CoreConfig {
                id: 0,
                units: vec![unit],
            }],
            router: RouterTable::new(),
            hs_latency: 0.0,
            mismatch_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if let Some(dt) = self.record_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid(format!(
                    "record_dt must be positive, got {dt}"
                )));
            }
        }
        if !(self.hs_latency >= 0.0 && self.hs_latency.is_finite()) {
            return Err(Error::invalid("handshake latency must be >= 0"));
        }
        let mut ids = BTreeSet::new();
        for core in &self.cores {
            if !ids.insert(core.id) {
                return Err(Error::invalid(format!("duplicate core id {}", core.id)));
            }
            if core.units.len() > 256 {
                return Err(Error::invalid(format!(
                    "core {} has more than 256 neurons",
                    core.id
                )));
            }
            for u in &core.units {
                u.synapse.validate()?;
                u.neuron.validate()?;
            }
        }
        for (src, dsts) in self.router.iter() {
            let known = self
                .cores
                .iter()
                .find(|c| c.id == src.core)
                .is_some_and(|c| (src.neuron as usize) < c.units.len());
            if !known {
                return Err(Error::invalid(format!(
                    "route source core {} neuron {} does not exist",
                    src.core, src.neuron
                )));
            }
            if let Some(d) = dsts.iter().find(|d| !ids.contains(&d.core)) {
                return Err(Error::invalid(format!(
                    "route destination core {} does not exist",
                    d.core
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeRecord {
    pub time: f64,
    pub core: u8,
    pub neuron: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub time: f64,
    pub core: u8,
    pub neuron: u8,
    pub i_syn: f64,
    pub i_mem: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub events_processed: u64,
    pub input_spikes: u64,
    pub routed_deliveries: u64,
    pub pulse_ends: u64,
    pub stale_pulse_ends: u64,
    pub predictions: u64,
    pub stale_predictions: u64,
    pub spikes: u64,
    pub refractory_ends: u64,
    pub ahp_pulse_ends: u64,
    pub record_samples: u64,
    pub dropped_inputs: u64,
    pub route: RouteStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub t_end: f64,
    pub spikes: Vec<SpikeRecord>,
    pub traces: Vec<TraceSample>,
    pub stats: SimStats,
    /// Spike count of every neuron, silent ones included, sorted by `(core, neuron)`.
    pub spike_counts: Vec<SpikeCount>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeCount {
    pub core: u8,
    pub neuron: u8,
    pub spikes: u64,
}

#[derive(Debug, Clone, Serialize)]
struct NeuronSummary {
    core: u8,
    neuron: u8,
    spikes: u64,
    mean_rate_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Summary<'a> {
    t_end: f64,
    neurons: Vec<NeuronSummary>,
    stats: &'a SimStats,
}

impl SimResult {
    pub fn spike_times(&self, core: u8, neuron: u8) -> Vec<f64> {
        self.spikes
            .iter()
            .filter(|s| s.core == core && s.neuron == neuron)
            .map(|s| s.time)
            .collect()
    }

    pub fn trace(&self, core: u8, neuron: u8) -> Vec<TraceSample> {
        self.traces
            .iter()
            .filter(|s| s.core == core && s.neuron == neuron)
            .copied()
            .collect()
    }

    /// `time,entity,i_syn,i_mem`
    pub fn traces_csv(&self) -> String {
        let mut out = String::from("time,entity,i_syn,i_mem\n");
        for s in &self.traces {
            let _ = writeln!(
                out,
                "{},c{}n{},{:e},{:e}",
                s.time, s.core, s.neuron, s.i_syn, s.i_mem
            );
        }
        out
    }

    /// `time,core,neuron`
    pub fn spikes_csv(&self) -> String {
        let mut out = String::from("time,core,neuron\n");
        for s in &self.spikes {
            let _ = writeln!(out, "{},{},{}", s.time, s.core, s.neuron);
        }
        out
    }

    pub fn output_events(&self) -> Vec<AerEvent> {
        self.spikes
            .iter()
            .map(|s| AerEvent {
                timestamp: s.time,
                address: encode_output(s.core, s.neuron),
            })
            .collect()
    }

    pub fn summary_json(&self) -> String {
        let neurons = self
            .spike_counts
            .iter()
            .map(|c| NeuronSummary {
                core: c.core,
                neuron: c.neuron,
                spikes: c.spikes,
                mean_rate_hz: c.spikes as f64 / self.t_end,
            })
            .collect();
        let summary = Summary {
            t_end: self.t_end,
            neurons,
            stats: &self.stats,
        };
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}

#[derive(Debug, Clone)]
struct Unit {
    array: SynapseArray,
    neuron_cfg: NeuronConfig,
    syn: SynapseArrayState,
    neuron: NeuronState,
    generation: u64,
    address: u32,
    label: String,
}

impl Unit {
    fn nmda(&self) -> Option<f64> {
        let c = &self.array.config;
        c.nmda_enabled.then_some(c.nmda_threshold)
    }

    fn drive(&self) -> SynapticDrive {
        SynapticDrive::from_dpi(&self.syn.dpi, &self.array.config.dpi)
    }

    fn advance(&mut self, t: f64) -> Result<()> {
        let drive = self.drive();
        let nmda = self.nmda();
        self.neuron.advance(&self.neuron_cfg, &drive, nmda, t)?;
        self.syn = self.array.advance(&self.syn, t)?;
        let (i_syn, i_ahp) = (self.syn.dpi.i_out, self.neuron.i_ahp());
        if !(i_syn.is_finite() && i_ahp.is_finite()) {
            return Err(Error::NumericFault {
                entity: self.label.clone(),
                time: t,
                detail: format!("I_syn = {i_syn}, I_ahp = {i_ahp}"),
            });
        }
        Ok(())
    }

    fn predict(&self, horizon: f64) -> Result<Option<f64>> {
        self.neuron
            .schedule_spike(&self.neuron_cfg, &self.drive(), self.nmda(), horizon)
    }
}

/// A running simulation. [`run`] is the one-shot entry point.
#[derive(Debug)]
pub struct Simulation {
    t_end: f64,
    record_dt: Option<f64>,
    now: f64,
    queue: BinaryHeap<Reverse<SimEvent>>,
    sequence: u64,
    cores: Vec<Vec<Unit>>,
    core_ids: Vec<u8>,
    router: Router,
    spikes: Vec<SpikeRecord>,
    traces: Vec<TraceSample>,
    stats: SimStats,
    next_sample: u64,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let model = MismatchModel::new(config.mismatch_sigma, config.seed)?;
        let mut array_index = 0u64;
        let mut cores = Vec::with_capacity(config.cores.len());
        for core in &config.cores {
            let mut units = Vec::with_capacity(core.units.len());
            for (i, u) in core.units.iter().enumerate() {
                let mm = SynapseMismatch::sample(&model, array_index, u.synapse.n_leak_cells);
                array_index += 1;
                let array = SynapseArray::new(u.synapse.clone(), mm)?;
                let syn = array.rest_state(0.0);
                units.push(Unit {
                    array,
                    neuron_cfg: u.neuron.clone(),
                    syn,
                    neuron: NeuronState::at_rest(0.0),
                    generation: 0,
                    address: encode_output(core.id, i as u8),
                    label: format!("core {} neuron {}", core.id, i),
                });
            }
            cores.push(units);
        }
        let mut sim = Self {
            t_end: config.t_end,
            record_dt: config.record_dt,
            now: 0.0,
            queue: BinaryHeap::new(),
            sequence: 0,
            cores,
            core_ids: config.cores.iter().map(|c| c.id).collect(),
            router: Router::new(config.router.clone(), config.hs_latency)?,
            spikes: Vec::new(),
            traces: Vec::new(),
            stats: SimStats::default(),
            next_sample: 0,
        };
        if sim.record_dt.is_some() {
            sim.push(0.0, EventKind::RecordSample, 0, 0, 0, 0, 0);
        }
        for c in 0..sim.cores.len() {
            for u in 0..sim.cores[c].len() {
                sim.invalidate_prediction(c, u)?;
            }
        }
        Ok(sim)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        time: f64,
        kind: EventKind,
        core: usize,
        unit: usize,
        block: u8,
        mask: u8,
        generation: u64,
    ) {
        if time > self.t_end {
            return;
        }
        self.sequence += 1;
        self.queue.push(Reverse(SimEvent {
            time,
            kind,
            core,
            unit,
            block,
            mask,
            generation,
            sequence: self.sequence,
        }));
    }

    fn core_index(&self, id: u8) -> Option<usize> {
        self.core_ids.iter().position(|&c| c == id)
    }

    /// Queue external input events. Events past `t_end` are ignored.
    pub fn schedule_stimulus(&mut self, stimulus: &[AerEvent]) -> Result<()> {
        for ev in stimulus {
            self.schedule_input(ev, EventKind::InputSpike)?;
        }
        Ok(())
    }

    fn schedule_input(&mut self, ev: &AerEvent, kind: EventKind) -> Result<()> {
        if !(ev.timestamp.is_finite() && ev.timestamp >= 0.0) {
            return Err(Error::MalformedEvent(format!(
                "bad timestamp {}",
                ev.timestamp
            )));
        }
        if ev.timestamp < self.now {
            return Err(Error::TimeReversal {
                from: self.now,
                to: ev.timestamp,
            });
        }
        let addr = decode_input(ev.address)?;
        match self.core_index(addr.core) {
            Some(c) => self.push(ev.timestamp, kind, c, 0, addr.block, addr.mask, 0),
            None => self.stats.dropped_inputs += 1,
        }
        Ok(())
    }

    /// Bump the unit's prediction generation and queue a fresh spike prediction.
    pub fn invalidate_prediction(&mut self, core: usize, unit: usize) -> Result<()> {
        let u = &mut self.cores[core][unit];
        u.generation += 1;
        let generation = u.generation;
        if let Some(t) = u.predict(self.t_end)? {
            self.stats.predictions += 1;
            self.push(
                t,
                EventKind::PredictedCrossing,
                core,
                unit,
                0,
                0,
                generation,
            );
        }
        Ok(())
    }

    /// Process the next event. Returns `false` once the queue is exhausted.
    pub fn step(&mut self) -> Result<bool> {
        let Some(Reverse(ev)) = self.queue.pop() else {
            return Ok(false);
        };
        debug_assert!(ev.time >= self.now, "event queue went backwards");
        if ev.time < self.now {
            return Err(Error::TimeReversal {
                from: self.now,
                to: ev.time,
            });
        }
        self.now = ev.time;
        self.stats.events_processed += 1;
        match ev.kind {
            EventKind::InputSpike | EventKind::RoutedDelivery => {
                if ev.kind == EventKind::InputSpike {
                    self.stats.input_spikes += 1;
                } else {
                    self.stats.routed_deliveries += 1;
                }
                for u in 0..self.cores[ev.core].len() {
                    let unit = &mut self.cores[ev.core][u];
                    unit.advance(ev.time)?;
                    let (syn, end) = unit.array.apply_input_event(
                        &unit.syn,
                        ev.time,
                        ev.block as usize,
                        ev.mask,
                    )?;
                    unit.syn = syn;
                    self.push(end, EventKind::PulseEnd, ev.core, u, ev.block, 0, 0);
                    self.invalidate_prediction(ev.core, u)?;
                }
            }
            EventKind::PulseEnd => {
                self.stats.pulse_ends += 1;
                let unit = &mut self.cores[ev.core][ev.unit];
                unit.advance(ev.time)?;
                let (syn, ended) = unit
                    .array
                    .end_pulse(&unit.syn, ev.time, ev.block as usize)?;
                unit.syn = syn;
                if ended {
                    self.invalidate_prediction(ev.core, ev.unit)?;
                } else {
                    self.stats.stale_pulse_ends += 1;
                }
            }
            EventKind::PredictedCrossing => {
                if ev.generation != self.cores[ev.core][ev.unit].generation {
                    self.stats.stale_predictions += 1;
                    return Ok(true);
                }
                self.fire(ev.core, ev.unit, ev.time)?;
            }
            EventKind::RefractoryEnd => {
                self.stats.refractory_ends += 1;
                self.cores[ev.core][ev.unit].advance(ev.time)?;
                self.invalidate_prediction(ev.core, ev.unit)?;
            }
            EventKind::AhpPulseEnd => {
                self.stats.ahp_pulse_ends += 1;
                let unit = &mut self.cores[ev.core][ev.unit];
                unit.advance(ev.time)?;
                unit.neuron.end_ahp_pulse(&unit.neuron_cfg, ev.time)?;
                self.invalidate_prediction(ev.core, ev.unit)?;
            }
            EventKind::RecordSample => self.record(ev.time)?,
        }
        Ok(true)
    }

    fn fire(&mut self, core: usize, unit: usize, t: f64) -> Result<()> {
        let u = &mut self.cores[core][unit];
        u.advance(t)?;
        let out = u
            .neuron
            .fire(&u.neuron_cfg, t, u.address)
            .map_err(|e| Error::NumericFault {
                entity: u.label.clone(),
                time: t,
                detail: e.to_string(),
            })?;
        let (t_ref, ahp_w) = (u.neuron_cfg.t_ref, u.neuron_cfg.ahp_pulse_width);
        self.stats.spikes += 1;
        self.spikes.push(SpikeRecord {
            time: t,
            core: self.core_ids[core],
            neuron: unit as u8,
        });
        self.push(t + t_ref, EventKind::RefractoryEnd, core, unit, 0, 0, 0);
        self.push(t + ahp_w, EventKind::AhpPulseEnd, core, unit, 0, 0, 0);
        for routed in self.router.route(&out)? {
            self.schedule_input(&routed, EventKind::RoutedDelivery)?;
        }
        self.invalidate_prediction(core, unit)
    }

    fn record(&mut self, t: f64) -> Result<()> {
        self.stats.record_samples += 1;
        for (c, units) in self.cores.iter().enumerate() {
            for (i, u) in units.iter().enumerate() {
                let mut probe = u.clone();
                probe.advance(t)?;
                self.traces.push(TraceSample {
                    time: t,
                    core: self.core_ids[c],
                    neuron: i as u8,
                    i_syn: probe.syn.dpi.i_out,
                    i_mem: probe.neuron.i_mem(),
                });
            }
        }
        if let Some(dt) = self.record_dt {
            self.next_sample += 1;
            let next = self.next_sample as f64 * dt;
            self.push(next, EventKind::RecordSample, 0, 0, 0, 0, 0);
        }
        Ok(())
    }

    /// Drain the queue up to `t_end` and collect results.
    pub fn finish(mut self) -> Result<SimResult> {
        while self.step()? {}
        let t_end = self.t_end;
        for units in &mut self.cores {
            for u in units.iter_mut() {
                u.advance(t_end)?;
            }
        }
        self.stats.route = self.router.stats;
        let mut spike_counts = Vec::new();
        for (c, units) in self.cores.iter().enumerate() {
            for (i, u) in units.iter().enumerate() {
                spike_counts.push(SpikeCount {
                    core: self.core_ids[c],
                    neuron: i as u8,
                    spikes: u.neuron.spike_count,
                });
            }
        }
        spike_counts.sort_by_key(|c| (c.core, c.neuron));
        Ok(SimResult {
            t_end,
            spikes: self.spikes,
            traces: self.traces,
            stats: self.stats,
            spike_counts,
        })
    }
}

/// Run a full simulation.
pub fn run(config: &SimConfig, stimulus: &[AerEvent]) -> Result<SimResult> {
    let mut sim = Simulation::new(config)?;
    sim.schedule_stimulus(stimulus)?;
    sim.finish()
}
