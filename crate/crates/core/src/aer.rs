//! Address-event representation.
//!
//! Address scheme v1 (32-bit words, unused bits must be zero):
//!
//! ```text
//! input  word: bits 0..4 branch mask | bits 4..10 synapse block | bits 16..24 core
//! output word: bits 0..8 neuron id                              | bits 16..24 core
//! ```
//!
//! Event streams are CSV, one event per line: `timestamp,0xADDRESS`, or the
//! expanded input form `timestamp,core,block,mask`. Lines starting with `#`
//! are comments.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADDRESS_SCHEME_VERSION: u32 = 1;

const MASK_BITS: u32 = 0x0000_000f;
const BLOCK_SHIFT: u32 = 4;
const BLOCK_BITS: u32 = 0x0000_03f0;
const CORE_SHIFT: u32 = 16;
const CORE_BITS: u32 = 0x00ff_0000;
const NEURON_BITS: u32 = 0x0000_00ff;
const INPUT_USED: u32 = MASK_BITS | BLOCK_BITS | CORE_BITS;
const OUTPUT_USED: u32 = NEURON_BITS | CORE_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AerEvent {
    pub timestamp: f64,
    pub address: u32,
}

impl AerEvent {
    pub fn new(timestamp: f64, address: u32) -> Result<Self> {
        if !(timestamp.is_finite() && timestamp >= 0.0) {
            return Err(Error::MalformedEvent(format!(
                "timestamp must be finite and >= 0, got {timestamp}"
            )));
        }
        Ok(Self { timestamp, address })
    }
}

/// Destination of an input event: one block of one core's synapse arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InputAddress {
    pub core: u8,
    pub block: u8,
    pub mask: u8,
}

/// Source of an output event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutputAddress {
    pub core: u8,
    pub neuron: u8,
}

pub fn encode_input(core: u8, block: u8, mask: u8) -> Result<u32> {
    if block >= 64 {
        return Err(Error::MalformedEvent(format!(
            "synapse block {block} >= 64"
        )));
    }
    if mask >= 16 {
        return Err(Error::MalformedEvent(format!(
            "branch mask {mask:#x} exceeds 4 bits"
        )));
    }
    Ok((core as u32) << CORE_SHIFT | (block as u32) << BLOCK_SHIFT | mask as u32)
}

pub fn decode_input(word: u32) -> Result<InputAddress> {
    if word & !INPUT_USED != 0 {
        return Err(Error::MalformedEvent(format!(
            "input word {word:#010x} has reserved bits set"
        )));
    }
    Ok(InputAddress {
        core: ((word & CORE_BITS) >> CORE_SHIFT) as u8,
        block: ((word & BLOCK_BITS) >> BLOCK_SHIFT) as u8,
        mask: (word & MASK_BITS) as u8,
    })
}

impl InputAddress {
    pub fn encode(self) -> Result<u32> {
        encode_input(self.core, self.block, self.mask)
    }
}

pub fn encode_output(core: u8, neuron: u8) -> u32 {
    (core as u32) << CORE_SHIFT | neuron as u32
}

pub fn decode_output(word: u32) -> Result<OutputAddress> {
    if word & !OUTPUT_USED != 0 {
        return Err(Error::MalformedEvent(format!(
            "output word {word:#010x} has reserved bits set"
        )));
    }
    Ok(OutputAddress {
        core: ((word & CORE_BITS) >> CORE_SHIFT) as u8,
        neuron: (word & NEURON_BITS) as u8,
    })
}

/// Fan-out table from neuron outputs to synapse inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RouterTable {
    routes: BTreeMap<OutputAddress, Vec<InputAddress>>,
}

impl RouterTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a destination; destinations keep insertion order.
    pub fn connect(&mut self, src: OutputAddress, dst: InputAddress) -> Result<()> {
        dst.encode()?;
        self.routes.entry(src).or_default().push(dst);
        Ok(())
    }

    pub fn destinations(&self, src: &OutputAddress) -> &[InputAddress] {
        self.routes.get(src).map_or(&[], |v| v.as_slice())
    }

    pub fn sources(&self) -> impl Iterator<Item = &OutputAddress> {
        self.routes.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OutputAddress, &Vec<InputAddress>)> {
        self.routes.iter()
    }

    pub fn fan_out(&self, src: &OutputAddress) -> usize {
        self.destinations(src).len()
    }
}

/// Deliver an output event to every destination after the handshake latency.
///
/// Unknown sources yield an empty list.
pub fn route(event: &AerEvent, table: &RouterTable, hs_latency: f64) -> Result<Vec<AerEvent>> {
    if !(hs_latency >= 0.0 && hs_latency.is_finite()) {
        return Err(Error::invalid(format!(
            "handshake latency must be >= 0, got {hs_latency}"
        )));
    }
    let src = decode_output(event.address)?;
    let t = event.timestamp + hs_latency;
    table
        .destinations(&src)
        .iter()
        .map(|d| {
            Ok(AerEvent {
                timestamp: t,
                address: d.encode()?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStats {
    pub routed_in: u64,
    pub delivered: u64,
    pub dropped: u64,
}

/// A router with fixed latency that keeps delivery statistics.
#[derive(Debug, Clone)]
pub struct Router {
    pub table: RouterTable,
    pub hs_latency: f64,
    pub stats: RouteStats,
}

impl Router {
    pub fn new(table: RouterTable, hs_latency: f64) -> Result<Self> {
        if !(hs_latency >= 0.0 && hs_latency.is_finite()) {
            return Err(Error::invalid(format!(
                "handshake latency must be >= 0, got {hs_latency}"
            )));
        }
        Ok(Self {
            table,
            hs_latency,
            stats: RouteStats::default(),
        })
    }

    pub fn route(&mut self, event: &AerEvent) -> Result<Vec<AerEvent>> {
        let out = route(event, &self.table, self.hs_latency)?;
        self.stats.routed_in += 1;
        if out.is_empty() {
            self.stats.dropped += 1;
        }
        self.stats.delivered += out.len() as u64;
        Ok(out)
    }
}

fn parse_address(field: &str) -> std::result::Result<u32, std::num::ParseIntError> {
    let f = field.trim();
    let hex = f
        .strip_prefix("0x")
        .or_else(|| f.strip_prefix("0X"))
        .unwrap_or(f);
    u32::from_str_radix(hex, 16)
}

/// Read an event stream. Expanded rows are validated against the input scheme.
pub fn read_events<R: Read>(reader: R) -> Result<Vec<AerEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut events = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedEvent(e.to_string()))?;
        let line = rec.position().map_or(i as u64 + 1, |p| p.line());
        let bad = |msg: String| Error::MalformedEvent(format!("line {line}: {msg}"));
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let Ok(t) = rec[0].parse::<f64>() else {
            if i == 0 {
                continue; // header row
            }
            return Err(bad(format!("bad timestamp {:?}", &rec[0])));
        };
        let address = match rec.len() {
            2 => parse_address(&rec[1])
                .map_err(|e| bad(format!("bad address {:?}: {e}", &rec[1])))?,
            4 => {
                let field = |k: usize| {
                    rec[k]
                        .parse::<u8>()
                        .map_err(|e| bad(format!("bad field {:?}: {e}", &rec[k])))
                };
                encode_input(field(1)?, field(2)?, field(3)?).map_err(|e| bad(e.to_string()))?
            }
            n => return Err(bad(format!("expected 2 or 4 fields, got {n}"))),
        };
        events.push(AerEvent::new(t, address).map_err(|e| bad(e.to_string()))?);
    }
    Ok(events)
}

/// Write events in compact `timestamp,0xADDRESS` form.
pub fn write_events<W: Write>(mut w: W, events: &[AerEvent]) -> Result<()> {
    for e in events {
        writeln!(w, "{},0x{:08X}", e.timestamp, e.address)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_words() {
        assert_eq!(encode_input(0, 0, 0).unwrap(), 0);
        assert_eq!(encode_input(2, 37, 0b1011).unwrap(), 0x0002_025B);
        assert_eq!(encode_output(1, 2), 0x0001_0002);
        assert_eq!(
            decode_input(0x0002_025B).unwrap(),
            InputAddress {
                core: 2,
                block: 37,
                mask: 11
            }
        );
    }

    #[test]
    fn rejects_out_of_range_and_reserved_bits() {
        assert!(encode_input(0, 64, 0).is_err());
        assert!(encode_input(0, 0, 16).is_err());
        assert!(decode_input(0x0000_0400).is_err());
        assert!(decode_input(0x0100_0000).is_err());
        assert!(decode_output(0x0000_0100).is_err());
        assert!(AerEvent::new(-1.0, 0).is_err());
        assert!(AerEvent::new(f64::NAN, 0).is_err());
    }

    #[test]
    fn route_fan_out() {
        let mut table = RouterTable::new();
        let src = OutputAddress { core: 0, neuron: 3 };
        let ev = AerEvent::new(1e-3, encode_output(0, 3)).unwrap();
        assert!(route(&ev, &table, 100e-9).unwrap().is_empty());
        for b in [5, 1, 9] {
            table
                .connect(
                    src,
                    InputAddress {
                        core: 1,
                        block: b,
                        mask: 1,
                    },
                )
                .unwrap();
        }
        let out = route(&ev, &table, 100e-9).unwrap();
        assert_eq!(out.len(), 3);
        let blocks: Vec<u8> = out
            .iter()
            .map(|e| decode_input(e.address).unwrap().block)
            .collect();
        assert_eq!(blocks, vec![5, 1, 9]);
        for e in &out {
            assert!((e.timestamp - (1e-3 + 100e-9)).abs() < 1e-18);
        }
        assert!(route(&ev, &table, -1e-9).is_err());
    }

    #[test]
    fn router_counts_drops() {
        let mut r = Router::new(RouterTable::new(), 0.0).unwrap();
        r.route(&AerEvent::new(0.0, encode_output(4, 4)).unwrap())
            .unwrap();
        assert_eq!(
            r.stats,
            RouteStats {
                routed_in: 1,
                delivered: 0,
                dropped: 1
            }
        );
    }

    #[test]
    fn event_stream_both_forms() {
        let text = "# stimulus\ntimestamp,address\n0.001,0x0002025B\n0.002,2,37,11\n\n0.003,025b\n";
        let ev = read_events(text.as_bytes()).unwrap();
        assert_eq!(ev.len(), 3);
        assert_eq!(ev[0].address, 0x0002_025B);
        assert_eq!(ev[1].address, 0x0002_025B);
        assert_eq!(ev[2].address, 0x025B);
        let mut buf = Vec::new();
        write_events(&mut buf, &ev).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone())
                .unwrap()
                .lines()
                .next()
                .unwrap(),
            "0.001,0x0002025B"
        );
        assert_eq!(read_events(buf.as_slice()).unwrap(), ev);
    }

    #[test]
    fn event_stream_errors_name_the_line() {
        let err = read_events("0.0,0x1\n0.1,1,64,0\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(read_events("0.0,1,2\n".as_bytes()).is_err());
        assert!(read_events("0.0,zz\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn stream_round_trip(ts in proptest::collection::vec((0.0f64..10.0, 0u8..=255, 0u8..64, 0u8..16), 0..50)) {
            let ev: Vec<AerEvent> = ts.iter()
                .map(|&(t, c, b, m)| AerEvent::new(t, encode_input(c, b, m).unwrap()).unwrap())
                .collect();
            let mut buf = Vec::new();
            write_events(&mut buf, &ev).unwrap();
            prop_assert_eq!(read_events(buf.as_slice()).unwrap(), ev);
        }

        #[test]
        fn reserved_bits_rejected(word in any::<u32>()) {
            prop_assert_eq!(decode_input(word).is_ok(), word & !INPUT_USED == 0);
        }
    }
}
