use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::catalog::{DemandId, Scenario};
use crate::power::CAPACITY_TOL;
use crate::topology::{hosts, path_for, Architecture, Channel, DeviceId, HostId, Topology};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibilityViolation {
    Unassigned(DemandId),
    UnknownDemand(DemandId),
    NotACandidate { demand: DemandId, host: HostId },
    NodeOverCapacity { host: HostId, load: f64, capacity: f64 },
    DeviceOverCapacity { device: DeviceId, traffic: f64, capacity: f64 },
    WavelengthOverCapacity { channel: Channel, traffic: f64, capacity: f64 },
}

fn over(value: f64, capacity: f64) -> bool {
    value > capacity * (1.0 + CAPACITY_TOL)
}

/// Checks an allocation against the assignment, processing, device and
/// wavelength constraints. Empty means feasible.
pub fn check_feasibility(
    topology: &Topology,
    scenario: &Scenario,
    architecture: Architecture,
    allocation: &BTreeMap<DemandId, HostId>,
) -> Vec<FeasibilityViolation> {
    let mut out = Vec::new();
    let candidates: Vec<HostId> = hosts(topology, architecture).iter().map(|h| h.id).collect();
    for d in &scenario.demands {
        if !allocation.contains_key(&d.id) {
            out.push(FeasibilityViolation::Unassigned(d.id));
        }
    }
    let mut node: BTreeMap<HostId, f64> = BTreeMap::new();
    let mut device: BTreeMap<DeviceId, f64> = BTreeMap::new();
    let mut channel: BTreeMap<Channel, f64> = BTreeMap::new();
    for (&d, &h) in allocation {
        let Some(demand) = scenario.demands.iter().find(|x| x.id == d) else {
            out.push(FeasibilityViolation::UnknownDemand(d));
            continue;
        };
        if !candidates.contains(&h) {
            out.push(FeasibilityViolation::NotACandidate { demand: d, host: h });
            continue;
        }
        let Ok(path) = path_for(topology, demand, h) else {
            out.push(FeasibilityViolation::NotACandidate { demand: d, host: h });
            continue;
        };
        *node.entry(h).or_default() += demand.load;
        for hop in &path.hops {
            *device.entry(hop.device).or_default() += demand.rate * hop.share;
        }
        if let Some(ch) = path.channel {
            *channel.entry(ch).or_default() += demand.rate;
        }
    }
    for (host, load) in node {
        let capacity = topology.catalog.effective_capacity(topology.host(host).tier);
        if over(load, capacity) {
            out.push(FeasibilityViolation::NodeOverCapacity { host, load, capacity });
        }
    }
    for (id, traffic) in device {
        let spec = topology.device_spec(id);
        if !spec.kind.is_passive() && over(traffic, spec.capacity) {
            out.push(FeasibilityViolation::DeviceOverCapacity { device: id, traffic, capacity: spec.capacity });
        }
    }
    let capacity = topology.catalog.wavelength_capacity;
    for (ch, traffic) in channel {
        if over(traffic, capacity) {
            out.push(FeasibilityViolation::WavelengthOverCapacity { channel: ch, traffic, capacity });
        }
    }
    out
}
