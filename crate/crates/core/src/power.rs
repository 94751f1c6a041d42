//! Idle-plus-proportional power model.
//!
//! An element with no load is power-gated and draws nothing. Once active it
//! draws its idle power plus a share of `(p_max - p_idle)` proportional to
//! its utilisation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{DemandId, NetworkDeviceSpec, ProcessingSpec, Scenario};
use crate::topology::{path_for, DeviceId, HostId, Topology, TopologyError};

/// Relative slack allowed on capacity comparisons.
pub const CAPACITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("{what} loaded to {load} exceeds its capacity {capacity}")]
    OverCapacity { what: String, load: f64, capacity: f64 },
    #[error("negative load {0}")]
    NegativeLoad(f64),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("demand {0} is not part of the scenario")]
    UnknownDemand(DemandId),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub processing_w: f64,
    pub network_w: f64,
    pub total_w: f64,
    pub per_node: BTreeMap<HostId, f64>,
    pub per_device: BTreeMap<DeviceId, f64>,
}

impl PowerBreakdown {
    /// Builds the totals from per-element figures, dropping zero entries.
    pub fn from_parts(per_node: BTreeMap<HostId, f64>, per_device: BTreeMap<DeviceId, f64>) -> Self {
        let per_node: BTreeMap<_, _> = per_node.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let per_device: BTreeMap<_, _> = per_device.into_iter().filter(|(_, w)| *w != 0.0).collect();
        let processing_w = per_node.values().sum::<f64>();
        let network_w = per_device.values().sum::<f64>();
        Self { processing_w, network_w, total_w: processing_w + network_w, per_node, per_device }
    }
}

fn curve(p_idle: f64, p_max: f64, capacity: f64, load: f64) -> f64 {
    if load == 0.0 {
        0.0
    } else {
        p_idle + (p_max - p_idle) * load / capacity
    }
}

fn within(load: f64, capacity: f64) -> bool {
    load <= capacity * (1.0 + CAPACITY_TOL)
}

/// Power of a processing node carrying `load` GFLOPs with `capacity_margin`
/// held back from its nominal capacity.
pub fn node_power_with_margin(spec: &ProcessingSpec, load: f64, capacity_margin: f64) -> Result<f64, PowerError> {
    if load < 0.0 {
        return Err(PowerError::NegativeLoad(load));
    }
    let effective = (1.0 - capacity_margin) * spec.capacity;
    if !within(load, effective) {
        return Err(PowerError::OverCapacity { what: spec.tier.to_string(), load, capacity: effective });
    }
    Ok(curve(spec.p_idle, spec.p_max, spec.capacity, load))
}

pub fn node_power(spec: &ProcessingSpec, load: f64) -> Result<f64, PowerError> {
    node_power_with_margin(spec, load, 0.0)
}

/// Power of a network device carrying `traffic` Gbps. Passive elements are free.
pub fn device_power(spec: &NetworkDeviceSpec, traffic: f64) -> Result<f64, PowerError> {
    if traffic < 0.0 {
        return Err(PowerError::NegativeLoad(traffic));
    }
    if spec.kind.is_passive() {
        return Ok(0.0);
    }
    if !within(traffic, spec.capacity) {
        return Err(PowerError::OverCapacity { what: spec.kind.to_string(), load: traffic, capacity: spec.capacity });
    }
    Ok(curve(spec.p_idle, spec.p_max, spec.capacity, traffic))
}

/// Per-host load and per-device traffic implied by an allocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Loads {
    pub node: BTreeMap<HostId, f64>,
    pub device: BTreeMap<DeviceId, f64>,
}

pub fn accumulate(
    topology: &Topology,
    scenario: &Scenario,
    allocation: &BTreeMap<DemandId, HostId>,
) -> Result<Loads, PowerError> {
    let mut loads = Loads::default();
    for (&d, &h) in allocation {
        let demand = scenario.demands.get(d.0).filter(|x| x.id == d).ok_or(PowerError::UnknownDemand(d))?;
        *loads.node.entry(h).or_default() += demand.load;
        for hop in path_for(topology, demand, h)?.hops {
            *loads.device.entry(hop.device).or_default() += demand.rate * hop.share;
        }
    }
    Ok(loads)
}

/// Recomputes the power of an allocation from the topology alone.
pub fn evaluate(
    topology: &Topology,
    scenario: &Scenario,
    allocation: &BTreeMap<DemandId, HostId>,
) -> Result<PowerBreakdown, PowerError> {
    let loads = accumulate(topology, scenario, allocation)?;
    let margin = topology.catalog.capacity_margin;
    let mut per_node = BTreeMap::new();
    for (&h, &load) in &loads.node {
        let w = node_power_with_margin(topology.host_spec(h), load, margin)
            .map_err(|e| rename(e, &topology.host(h).name))?;
        per_node.insert(h, w);
    }
    let mut per_device = BTreeMap::new();
    for (&d, &traffic) in &loads.device {
        let w = device_power(topology.device_spec(d), traffic).map_err(|e| rename(e, &topology.device(d).name))?;
        per_device.insert(d, w);
    }
    Ok(PowerBreakdown::from_parts(per_node, per_device))
}

fn rename(e: PowerError, name: &str) -> PowerError {
    match e {
        PowerError::OverCapacity { load, capacity, .. } => {
            PowerError::OverCapacity { what: name.to_string(), load, capacity }
        }
        other => other,
    }
}
