use std::collections::BTreeMap;

use crate::catalog::{validate_scenario, Scenario, Tier};
use crate::power::CAPACITY_TOL;
use crate::topology::{hosts, path_for, Architecture, Attachment, Channel, DeviceId, Topology};

use super::{Constraint, ConstraintKind, MilpProblem, OptError, Sense, Var, VarRole};

fn ident(name: &str) -> String {
    name.replace('-', "_")
}

/// Builds the allocation MILP for the candidate hosts of `architecture`.
pub fn formulate(
    topology: &Topology,
    scenario: &Scenario,
    architecture: Architecture,
) -> Result<MilpProblem, OptError> {
    let violations = validate_scenario(scenario);
    if !violations.is_empty() {
        return Err(OptError::InvalidScenario(violations));
    }
    let catalog = &topology.catalog;
    let candidates = hosts(topology, architecture);
    let n_d = scenario.demands.len();
    let n_h = candidates.len();

    let effective: Vec<f64> = candidates.iter().map(|h| catalog.effective_capacity(h.tier)).collect();
    for d in &scenario.demands {
        if !effective.iter().any(|&cap| d.load <= cap * (1.0 + CAPACITY_TOL)) {
            return Err(OptError::NoHostFits { demand: d.id, load: d.load });
        }
    }

    let host_slopes: Vec<f64> = candidates
        .iter()
        .map(|h| {
            let spec = catalog.processing(h.tier);
            (spec.p_max - spec.p_idle) / spec.capacity
        })
        .collect();

    let mut vars = Vec::with_capacity(n_d * n_h + n_h);
    // traffic per (device, x var) and per (channel, x var)
    let mut device_terms: BTreeMap<DeviceId, Vec<(usize, f64)>> = BTreeMap::new();
    let mut channel_terms: BTreeMap<Channel, Vec<(usize, f64)>> = BTreeMap::new();
    for (di, d) in scenario.demands.iter().enumerate() {
        for (si, h) in candidates.iter().enumerate() {
            let index = di * n_h + si;
            let path = path_for(topology, d, h.id)?;
            let mut cost = host_slopes[si] * d.load;
            for hop in &path.hops {
                let spec = topology.device_spec(hop.device);
                if spec.kind.is_passive() {
                    continue;
                }
                let traffic = d.rate * hop.share;
                cost += (spec.p_max - spec.p_idle) / spec.capacity * traffic;
                device_terms.entry(hop.device).or_default().push((index, traffic));
            }
            if let Some(ch) = path.channel {
                channel_terms.entry(ch).or_default().push((index, d.rate));
            }
            vars.push(Var {
                name: format!("x_{}_{}", d.id, ident(&h.name)),
                role: VarRole::Assign { demand: di, host: si },
                cost,
            });
        }
    }
    for (si, h) in candidates.iter().enumerate() {
        vars.push(Var {
            name: format!("a_{}", ident(&h.name)),
            role: VarRole::Activate { host: si },
            cost: catalog.processing(h.tier).p_idle,
        });
    }

    let mut constraints = Vec::new();
    for (di, d) in scenario.demands.iter().enumerate() {
        constraints.push(Constraint {
            name: format!("assign_{}", d.id),
            kind: ConstraintKind::Assignment { demand: di },
            terms: (0..n_h).map(|si| (di * n_h + si, 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for (si, h) in candidates.iter().enumerate() {
        let mut terms: Vec<(usize, f64)> =
            scenario.demands.iter().enumerate().map(|(di, d)| (di * n_h + si, d.load)).collect();
        terms.push((n_d * n_h + si, -effective[si]));
        constraints.push(Constraint {
            name: format!("cap_{}", ident(&h.name)),
            kind: ConstraintKind::NodeCapacity { host: si },
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
    }
    let mut device_slopes = BTreeMap::new();
    for (device, mut terms) in device_terms {
        let spec = topology.device_spec(device);
        let y = vars.len();
        let name = ident(&topology.device(device).name);
        vars.push(Var { name: format!("y_{name}"), role: VarRole::Device { device }, cost: spec.p_idle });
        device_slopes.insert(y, (spec.p_max - spec.p_idle) / spec.capacity);
        terms.push((y, -spec.capacity));
        constraints.push(Constraint {
            name: format!("dev_{name}"),
            kind: ConstraintKind::DeviceCapacity { device },
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
    }
    for (channel, terms) in channel_terms {
        constraints.push(Constraint {
            name: format!("wl_{:?}_r{}", channel.label, channel.source_room + 1).replace(['(', ')'], ""),
            kind: ConstraintKind::Wavelength { channel },
            terms,
            sense: Sense::Le,
            rhs: catalog.wavelength_capacity,
        });
    }

    // idle user devices of one room are interchangeable, as are equal demands
    // from one room (unless a demand may run on its own device)
    let host_classes = candidates
        .iter()
        .map(|h| match h.attachment {
            Attachment::User(u) if h.tier == Tier::UserDevice && !h.demanding => Some(u.room),
            _ => None,
        })
        .collect();
    let mut keys: Vec<(usize, u64, u64)> = Vec::new();
    let demand_classes = scenario
        .demands
        .iter()
        .map(|d| {
            if topology.allow_self_processing && architecture != Architecture::CloudOnly {
                return None;
            }
            let key = (d.source.room, d.load.to_bits(), d.rate.to_bits());
            Some(keys.iter().position(|k| *k == key).unwrap_or_else(|| {
                keys.push(key);
                keys.len() - 1
            }))
        })
        .collect();

    Ok(MilpProblem {
        vars,
        constraints,
        demands: scenario.demands.iter().map(|d| d.id).collect(),
        demand_loads: scenario.demands.iter().map(|d| d.load).collect(),
        hosts: candidates.iter().map(|h| h.id).collect(),
        host_names: candidates.iter().map(|h| h.name.clone()).collect(),
        host_slopes,
        device_slopes,
        host_classes,
        demand_classes,
    })
}
