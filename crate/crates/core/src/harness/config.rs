//! TOML experiment files.
//!
//! ```toml
//! [experiment]
//! kind = "ff-curve"
//! seed = 7
//!
//! [biases]
//! "wht0!" = "10nA"          # literal with unit
//! "dpi_thr!" = "code:1/85"  # coarse/fine code
//! "nrn_tau!" = 171          # packed 10-bit code
//! t_ref = "5ms"
//!
//! [stimulus]
//! rates = [0, 100, 200]     # or rate = 100, or rate_start/rate_stop/rate_step
//! pulse_width = "1ms"
//! ```
//!
//! Every key left out keeps the preset value for the experiment kind.

use toml::{Table, Value};

use super::presets::{ExperimentKind, ExperimentSpec, BIAS_NAMES};
use super::units::{current_from_code, parse_current_or_code, parse_quantity, Dim};
use crate::error::{Error, Result};

/// Parse a config file for `kind`. A `kind` inside the file must agree.
pub fn parse_config(src: &str, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let table: Table = src.parse().map_err(|e: toml::de::Error| Error::Config {
        line: e.span().map(|s| line_at(src, s.start)),
        msg: e.message().to_string(),
    })?;
    let mut spec = ExperimentSpec::defaults(kind);
    let p = Parser { src };
    for (section, value) in &table {
        let t = value
            .as_table()
            .ok_or_else(|| p.err(None, section, "expected a [section]"))?;
        match section.as_str() {
            "experiment" => p.experiment(t, &mut spec)?,
            "biases" => p.biases(t, &mut spec)?,
            "stimulus" => p.stimulus(t, &mut spec)?,
            "engine" => p.engine(t, &mut spec)?,
            "measure" => p.measure(t, &mut spec)?,
            "mismatch" => p.mismatch(t, &mut spec)?,
            "relu" => p.relu(t, &mut spec)?,
            "report" => p.report(t, &mut spec)?,
            "output" => {}
            other => return Err(p.err(None, other, "unknown section")),
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn line_at(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

struct Parser<'a> {
    src: &'a str,
}

impl Parser<'_> {
    /// Line of `key` inside `[section]`, or of the section header when `key` is `None`.
    fn line_of(&self, section: Option<&str>, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, raw) in self.src.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
                current = name.trim().to_string();
                if section.is_none() && current == key {
                    return Some(i + 1);
                }
                continue;
            }
            if section.is_some_and(|s| s == current) {
                let k = line
                    .split('=')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .trim_matches('"');
                if k == key {
                    return Some(i + 1);
                }
            }
        }
        None
    }

    fn err(&self, section: Option<&str>, key: &str, msg: &str) -> Error {
        Error::Config {
            line: self.line_of(section, key),
            msg: match section {
                Some(s) => format!("[{s}] {key}: {msg}"),
                None => format!("[{key}]: {msg}"),
            },
        }
    }

    fn wrap(&self, section: &str, key: &str, e: Error) -> Error {
        let msg = match e {
            Error::Config { msg, .. } => msg,
            other => other.to_string(),
        };
        self.err(Some(section), key, &msg)
    }

    fn float(&self, section: &str, key: &str, v: &Value) -> Result<f64> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.err(Some(section), key, "expected a number")),
        }
    }

    fn uint(&self, section: &str, key: &str, v: &Value, max: u64) -> Result<u64> {
        match v {
            Value::Integer(i) if *i >= 0 && (*i as u64) <= max => Ok(*i as u64),
            _ => Err(self.err(
                Some(section),
                key,
                &format!("expected an integer in 0..={max}"),
            )),
        }
    }

    fn quantity(&self, section: &str, key: &str, v: &Value, dim: Dim) -> Result<f64> {
        match v {
            Value::String(s) => parse_quantity(s, dim).map_err(|e| self.wrap(section, key, e)),
            _ => self.float(section, key, v),
        }
    }

    fn current(&self, section: &str, key: &str, v: &Value) -> Result<f64> {
        let r = match v {
            Value::String(s) => parse_current_or_code(s),
            Value::Integer(i) => current_from_code(*i),
            Value::Float(f) => Ok(*f),
            _ => return Err(self.err(Some(section), key, "expected a current")),
        };
        r.map_err(|e| self.wrap(section, key, e))
    }

    fn experiment(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "experiment";
        for (k, v) in t {
            match k.as_str() {
                "kind" => {
                    let parsed = v.as_str().and_then(ExperimentKind::parse);
                    match parsed {
                        Some(kind) if kind == spec.kind => {}
                        Some(_) => {
                            return Err(self.err(Some(S), k, "does not match the subcommand"))
                        }
                        None => return Err(self.err(Some(S), k, "unknown experiment kind")),
                    }
                }
                "seed" => spec.seed = self.uint(S, k, v, i64::MAX as u64)?,
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }

    fn biases(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "biases";
        let b = &mut spec.biases;
        for (k, v) in t {
            if !BIAS_NAMES.contains(&k.as_str()) {
                return Err(self.err(Some(S), k, "unknown bias name"));
            }
            match k.as_str() {
                "wht0!" => b.wht[0] = self.current(S, k, v)?,
                "wht1!" => b.wht[1] = self.current(S, k, v)?,
                "wht2!" => b.wht[2] = self.current(S, k, v)?,
                "wht3!" => b.wht[3] = self.current(S, k, v)?,
                "dpi_cap" => b.dpi_cap = self.quantity(S, k, v, Dim::Capacitance)?,
                "dpi_tau!" => b.dpi_tau = self.current(S, k, v)?,
                "dpi_thr!" => b.dpi_thr = self.current(S, k, v)?,
                "nrn_cap" => b.nrn_cap = self.quantity(S, k, v, Dim::Capacitance)?,
                "nrn_tau!" => b.nrn_tau = self.current(S, k, v)?,
                "nrn_thr!" => b.nrn_thr = self.current(S, k, v)?,
                "I_ref" => b.i_ref = self.current(S, k, v)?,
                "t_ref" => b.t_ref = self.quantity(S, k, v, Dim::Time)?,
                "ahp_cap" => b.ahp_cap = self.quantity(S, k, v, Dim::Capacitance)?,
                "ahp_tau!" => b.ahp_tau = self.current(S, k, v)?,
                "ahp_thr!" => b.ahp_thr = self.current(S, k, v)?,
                "ahp_width" => b.ahp_width = self.quantity(S, k, v, Dim::Time)?,
                "ahp_amp" => b.ahp_amp = self.current(S, k, v)?,
                "I_const" => b.i_const = self.current(S, k, v)?,
                "I_dark" => b.i_dark = self.current(S, k, v)?,
                "nmda" => {
                    b.nmda_enabled = v
                        .as_bool()
                        .ok_or_else(|| self.err(Some(S), k, "expected true or false"))?
                }
                "nmda_thr" => b.nmda_thr = self.current(S, k, v)?,
                _ => unreachable!("bias name table out of sync"),
            }
        }
        Ok(())
    }

    fn stimulus(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "stimulus";
        let mut range = (None, None, None);
        let mut amplitude = None;
        for (k, v) in t {
            let s = &mut spec.stimulus;
            match k.as_str() {
                "rate" => s.rates = vec![self.quantity(S, k, v, Dim::Frequency)?],
                "rates" => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| self.err(Some(S), k, "expected a list of rates"))?;
                    s.rates = arr
                        .iter()
                        .map(|x| self.quantity(S, k, x, Dim::Frequency))
                        .collect::<Result<_>>()?;
                    if s.rates.windows(2).any(|w| w[0] > w[1]) {
                        return Err(self.err(Some(S), k, "rates must be sorted ascending"));
                    }
                    if s.rates.is_empty() {
                        return Err(self.err(Some(S), k, "rate list is empty"));
                    }
                }
                "rate_start" => range.0 = Some(self.quantity(S, k, v, Dim::Frequency)?),
                "rate_stop" => range.1 = Some(self.quantity(S, k, v, Dim::Frequency)?),
                "rate_step" => range.2 = Some(self.quantity(S, k, v, Dim::Frequency)?),
                "pulse_width" => s.pulse_width = self.quantity(S, k, v, Dim::Time)?,
                "amplitude" => amplitude = Some(self.current(S, k, v)?),
                "core" => s.core = self.uint(S, k, v, 255)? as u8,
                "block" => s.block = self.uint(S, k, v, 63)? as u8,
                "mask" => s.mask = self.uint(S, k, v, 15)? as u8,
                "poisson" => {
                    s.poisson = v
                        .as_bool()
                        .ok_or_else(|| self.err(Some(S), k, "expected true or false"))?
                }
                "file" => {
                    s.file = Some(
                        v.as_str()
                            .ok_or_else(|| self.err(Some(S), k, "expected a path"))?
                            .to_string(),
                    )
                }
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        match range {
            (None, None, None) => {}
            (Some(a), Some(b), Some(step)) if step > 0.0 && b >= a => {
                let n = ((b - a) / step + 1e-9).floor() as usize;
                spec.stimulus.rates = (0..=n).map(|i| a + step * i as f64).collect();
            }
            _ => {
                return Err(self.err(
                    Some(S),
                    "rate_start",
                    "rate_start, rate_stop and rate_step must be given together with step > 0",
                ))
            }
        }
        // amplitude applies to every branch selected by the stimulus mask
        if let Some(a) = amplitude {
            for (i, w) in spec.biases.wht.iter_mut().enumerate() {
                if spec.stimulus.mask & (1 << i) != 0 {
                    *w = a;
                }
            }
        }
        Ok(())
    }

    fn engine(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "engine";
        for (k, v) in t {
            match k.as_str() {
                "t_end" => spec.engine.t_end = self.quantity(S, k, v, Dim::Time)?,
                "record_dt" => spec.engine.record_dt = self.quantity(S, k, v, Dim::Time)?,
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }

    fn measure(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "measure";
        for (k, v) in t {
            let m = &mut spec.measure;
            match k.as_str() {
                "warmup" => m.warmup = Some(self.quantity(S, k, v, Dim::Time)?),
                "window" => m.window = self.quantity(S, k, v, Dim::Time)?,
                "max_window" => m.max_window = self.quantity(S, k, v, Dim::Time)?,
                "min_spikes" => m.min_spikes = self.uint(S, k, v, u32::MAX as u64)?,
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }

    fn mismatch(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "mismatch";
        for (k, v) in t {
            let m = &mut spec.mismatch;
            match k.as_str() {
                "sigma" => m.sigma = self.float(S, k, v)?,
                "instances" => m.instances = self.uint(S, k, v, 10_000_000)? as usize,
                "max_residual_std" => m.max_residual_std = self.float(S, k, v)?,
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }

    fn relu(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "relu";
        for (k, v) in t {
            match k.as_str() {
                "gain_factors" => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| self.err(Some(S), k, "expected a list"))?;
                    spec.gain_factors = arr
                        .iter()
                        .map(|x| self.float(S, k, x))
                        .collect::<Result<_>>()?;
                }
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }

    fn report(&self, t: &Table, spec: &mut ExperimentSpec) -> Result<()> {
        const S: &str = "report";
        for (k, v) in t {
            match k.as_str() {
                "n_neurons" => spec.report.n_neurons = self.uint(S, k, v, u32::MAX as u64)?,
                "n_blocks" => spec.report.n_blocks = self.uint(S, k, v, u32::MAX as u64)?,
                _ => return Err(self.err(Some(S), k, "unknown key")),
            }
        }
        Ok(())
    }
}
