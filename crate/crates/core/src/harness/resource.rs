//! Silicon area and capacitance bookkeeping.

use serde::{Deserialize, Serialize};

/// Per-instance layout figures. Each neuron carries two DPIs: its membrane
/// and the shared synapse filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceModel {
    /// µm²
    pub synapse_block_area: f64,
    /// µm²
    pub dpi_area: f64,
    /// µm²
    pub neuron_area: f64,
    /// F
    pub dpi_cap: f64,
    /// F
    pub neuron_cap: f64,
}

impl Default for ResourceModel {
    fn default() -> Self {
        Self {
            synapse_block_area: 3.0,
            dpi_area: 12.5,
            neuron_area: 20.0,
            dpi_cap: 1e-12,
            neuron_cap: 1.5e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceReport {
    pub n_neurons: u64,
    pub n_synapse_blocks_per_neuron: u64,
    pub neuron_area_um2: f64,
    pub dpi_area_um2: f64,
    pub synapse_area_um2: f64,
    pub total_area_um2: f64,
    pub total_area_mm2: f64,
    pub total_capacitance_pf: f64,
    pub model: ResourceModel,
}

pub fn resource_report(n_neurons: u64, n_blocks: u64, model: &ResourceModel) -> ResourceReport {
    let n = n_neurons as f64;
    let neuron_area = n * model.neuron_area;
    let dpi_area = n * 2.0 * model.dpi_area;
    let synapse_area = n * n_blocks as f64 * model.synapse_block_area;
    let total = neuron_area + dpi_area + synapse_area;
    ResourceReport {
        n_neurons,
        n_synapse_blocks_per_neuron: n_blocks,
        neuron_area_um2: neuron_area,
        dpi_area_um2: dpi_area,
        synapse_area_um2: synapse_area,
        total_area_um2: total,
        total_area_mm2: total * 1e-6,
        // membrane capacitor (neuron_cap) plus the synapse filter capacitor (dpi_cap)
        total_capacitance_pf: n * (model.neuron_cap + model.dpi_cap) * 1e12,
        model: *model,
    }
}
