//! Event-driven behavioral simulator of a subthreshold mixed-signal neuromorphic core.

pub mod aer;
pub mod dpi;
pub mod engine;
pub mod error;
pub mod expsum;
pub mod harness;
pub mod neuron;
pub mod params;
pub mod synapse;

pub use error::{Error, Result};
