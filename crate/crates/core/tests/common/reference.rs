//! Fixed-step reference integrator, written independently of the event engine.
//!
//! Every filter is stepped with the exponential-Euler update for an input
//! that is linear across the step:
//!
//! `y(t+h) = g (u1 - a tau) + (y0 - g (u0 - a tau)) e^(-h/tau)`, `a = (u1 - u0) / h`.
//!
//! Steps are shortened to land on pulse edges, refractory ends, AHP pulse
//! ends and sample times. A threshold crossing inside a step is located by
//! linear interpolation and the step is redone up to that point.

#[derive(Debug, Clone, Copy)]
pub struct Filter {
    pub tau: f64,
    pub gain: f64,
}

impl Filter {
    fn step(&self, y0: f64, u0: f64, u1: f64, h: f64) -> f64 {
        if h == 0.0 {
            return y0;
        }
        let e = (-h / self.tau).exp();
        let a = (u1 - u0) / h;
        let g = self.gain;
        g * (u1 - a * self.tau) + (y0 - g * (u0 - a * self.tau)) * e
    }
}

#[derive(Debug, Clone)]
pub struct RefModel {
    pub syn: Filter,
    pub mem: Filter,
    pub ahp: Filter,
    pub i_ref: f64,
    pub t_ref: f64,
    pub ahp_width: f64,
    pub ahp_amp: f64,
    pub i_const: f64,
    /// Synapse DPI input while a pulse is on and off.
    pub pulse_current: f64,
    pub idle_current: f64,
    pub pulse_width: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RefOutput {
    pub spikes: Vec<f64>,
    /// `(t, i_syn, i_mem)`
    pub samples: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct State {
    t: f64,
    syn: f64,
    mem: f64,
    ahp: f64,
}

impl RefModel {
    fn pulse_on(&self, starts: &[f64], t: f64) -> bool {
        // retriggered pulses merge, so "on" means some start within one width
        let idx = starts.partition_point(|&s| s <= t);
        idx > 0 && t < starts[idx - 1] + self.pulse_width
    }

    fn drive(&self, mem_input_syn: f64, ahp: f64) -> f64 {
        (mem_input_syn + self.i_const - ahp).max(0.0)
    }

    /// Advance all filters by `h` with the synapse and AHP inputs held.
    fn advance(&self, s: State, h: f64, syn_in: f64, ahp_in: f64, refractory: bool) -> State {
        let syn = self.syn.step(s.syn, syn_in, syn_in, h);
        let ahp = self.ahp.step(s.ahp, ahp_in, ahp_in, h);
        let mem = if refractory {
            0.0
        } else {
            let u0 = self.drive(s.syn, s.ahp);
            let u1 = self.drive(syn, ahp);
            self.mem.step(s.mem, u0, u1, h)
        };
        State {
            t: s.t + h,
            syn,
            mem,
            ahp,
        }
    }

    /// Simulate with pulse onsets at `starts` (sorted) until `t_end`.
    pub fn run(&self, starts: &[f64], t_end: f64, dt: f64, sample_dt: f64) -> RefOutput {
        let mut out = RefOutput::default();
        let mut s = State {
            t: 0.0,
            syn: 0.0,
            mem: 0.0,
            ahp: 0.0,
        };
        let mut edges: Vec<f64> = starts
            .iter()
            .flat_map(|&t| [t, t + self.pulse_width])
            .filter(|&t| t <= t_end)
            .collect();
        edges.sort_by(f64::total_cmp);
        let mut edge_idx = 0;
        let mut refractory_until = f64::NEG_INFINITY;
        let mut ahp_ends: Vec<f64> = Vec::new();
        let mut k_sample = 0u64;
        loop {
            let next_sample = k_sample as f64 * sample_dt;
            if next_sample <= s.t && next_sample <= t_end {
                let mem = if s.t < refractory_until { 0.0 } else { s.mem };
                out.samples.push((next_sample, s.syn, mem));
                k_sample += 1;
                continue;
            }
            if s.t >= t_end {
                break;
            }
            while edge_idx < edges.len() && edges[edge_idx] <= s.t {
                edge_idx += 1;
            }
            ahp_ends.retain(|&e| e > s.t);
            let mut target = (s.t + dt).min(t_end).min(next_sample);
            if let Some(&e) = edges.get(edge_idx) {
                target = target.min(e);
            }
            if refractory_until > s.t {
                target = target.min(refractory_until);
            }
            if let Some(&e) = ahp_ends.iter().min_by(|a, b| a.total_cmp(b)) {
                target = target.min(e);
            }
            let h = target - s.t;
            let syn_in = if self.pulse_on(starts, s.t) {
                self.pulse_current
            } else {
                self.idle_current
            };
            let ahp_in = ahp_ends.len() as f64 * self.ahp_amp;
            let refractory = s.t < refractory_until;
            let next = self.advance(s, h, syn_in, ahp_in, refractory);
            if !refractory && next.mem >= self.i_ref {
                let frac = ((self.i_ref - s.mem) / (next.mem - s.mem)).clamp(0.0, 1.0);
                let mut at = self.advance(s, h * frac, syn_in, ahp_in, false);
                let t_spike = at.t;
                out.spikes.push(t_spike);
                at.mem = 0.0;
                refractory_until = t_spike + self.t_ref;
                if self.ahp_amp > 0.0 {
                    ahp_ends.push(t_spike + self.ahp_width);
                }
                s = at;
            } else {
                s = next;
                // land exactly on the edge that bounded the step
                s.t = target;
            }
        }
        out
    }
}
