//! Exhaustive enumeration oracle. Shares nothing with the MILP path: it
//! walks topology paths and applies the power curves directly.

use std::collections::BTreeMap;

use crate::catalog::{validate_scenario, DemandId, Scenario};
use crate::par::{self, Execution};
use crate::power::{device_power, evaluate, node_power_with_margin};
use crate::topology::{hosts, path_for, Architecture, Channel, HostId, Topology};

use super::{abs_tol, check_feasibility, OptError, Optimality, Solution, DEFAULT_TOLERANCE};

/// Largest number of assignments the oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

struct Table {
    n_d: usize,
    n_h: usize,
    loads: Vec<f64>,
    node_specs: Vec<crate::catalog::ProcessingSpec>,
    /// per (d, s): (device index, traffic)
    traffic: Vec<Vec<(usize, f64)>>,
    channel: Vec<Option<(usize, f64)>>,
    devices: Vec<crate::catalog::NetworkDeviceSpec>,
    n_channels: usize,
    wavelength_capacity: f64,
    margin: f64,
}

impl Table {
    fn cost(&self, digits: &[usize], node: &mut [f64], dev: &mut [f64], ch: &mut [f64]) -> Option<f64> {
        node.iter_mut().for_each(|x| *x = 0.0);
        dev.iter_mut().for_each(|x| *x = 0.0);
        ch.iter_mut().for_each(|x| *x = 0.0);
        for (d, &s) in digits.iter().enumerate() {
            node[s] += self.loads[d];
            let k = d * self.n_h + s;
            for &(e, t) in &self.traffic[k] {
                dev[e] += t;
            }
            if let Some((c, r)) = self.channel[k] {
                ch[c] += r;
            }
        }
        if ch.iter().any(|&t| t > self.wavelength_capacity * (1.0 + crate::power::CAPACITY_TOL)) {
            return None;
        }
        let mut total = 0.0;
        for (s, &load) in node.iter().enumerate() {
            total += node_power_with_margin(&self.node_specs[s], load, self.margin).ok()?;
        }
        for (e, &t) in dev.iter().enumerate() {
            total += device_power(&self.devices[e], t).ok()?;
        }
        Some(total)
    }

    fn decode(&self, mut index: u64, digits: &mut [usize]) {
        for d in (0..self.n_d).rev() {
            digits[d] = (index % self.n_h as u64) as usize;
            index /= self.n_h as u64;
        }
    }
}

/// Enumerates every assignment of demands to the candidate hosts of
/// `architecture` and returns the cheapest feasible one, lexicographically
/// smallest among ties.
pub fn brute_force(topology: &Topology, scenario: &Scenario, architecture: Architecture) -> Result<Solution, OptError> {
    brute_force_with(topology, scenario, architecture, Execution::default())
}

pub fn brute_force_with(
    topology: &Topology,
    scenario: &Scenario,
    architecture: Architecture,
    exec: Execution,
) -> Result<Solution, OptError> {
    let violations = validate_scenario(scenario);
    if !violations.is_empty() {
        return Err(OptError::InvalidScenario(violations));
    }
    let candidates: Vec<HostId> = hosts(topology, architecture).iter().map(|h| h.id).collect();
    let n_d = scenario.demands.len();
    let n_h = candidates.len();
    let total = (n_h as u64)
        .checked_pow(n_d as u32)
        .filter(|&t| t <= BRUTE_FORCE_LIMIT)
        .ok_or(OptError::TooLarge { candidates: n_h, demands: n_d })?;

    let mut device_index = BTreeMap::new();
    let mut devices = Vec::new();
    let mut channel_index: BTreeMap<Channel, usize> = BTreeMap::new();
    let mut traffic = Vec::with_capacity(n_d * n_h);
    let mut channel = Vec::with_capacity(n_d * n_h);
    for d in &scenario.demands {
        for &h in &candidates {
            let path = path_for(topology, d, h)?;
            let mut row = Vec::new();
            for hop in &path.hops {
                let next = device_index.len();
                let e = *device_index.entry(hop.device).or_insert_with(|| {
                    devices.push(topology.device_spec(hop.device).clone());
                    next
                });
                row.push((e, d.rate * hop.share));
            }
            traffic.push(row);
            channel.push(path.channel.map(|c| {
                let next = channel_index.len();
                (*channel_index.entry(c).or_insert(next), d.rate)
            }));
        }
    }
    let table = Table {
        n_d,
        n_h,
        loads: scenario.demands.iter().map(|d| d.load).collect(),
        node_specs: candidates.iter().map(|&h| topology.host_spec(h).clone()).collect(),
        traffic,
        channel,
        n_channels: channel_index.len(),
        devices,
        wavelength_capacity: topology.catalog.wavelength_capacity,
        margin: topology.catalog.capacity_margin,
    };

    let chunk = 1 << 14;
    let scan = |range: std::ops::Range<u64>, threshold: Option<f64>| -> Option<(f64, u64)> {
        let mut digits = vec![0; n_d];
        let mut node = vec![0.0; n_h];
        let mut dev = vec![0.0; table.devices.len()];
        let mut ch = vec![0.0; table.n_channels];
        let mut best: Option<(f64, u64)> = None;
        for i in range {
            table.decode(i, &mut digits);
            let Some(v) = table.cost(&digits, &mut node, &mut dev, &mut ch) else { continue };
            match threshold {
                // first index within the tie band
                Some(t) if v <= t => return Some((v, i)),
                Some(_) => {}
                None => {
                    if best.is_none_or(|(b, _)| v < b) {
                        best = Some((v, i));
                    }
                }
            }
        }
        best
    };

    let minimum = par::map_ranges(total, chunk, exec, |r| scan(r, None))
        .into_iter()
        .flatten()
        .map(|(v, _)| v)
        .fold(f64::INFINITY, f64::min);
    if minimum == f64::INFINITY {
        return Err(OptError::Infeasible { demand: scenario.demands.first().map(|d| d.id).unwrap_or(DemandId(0)) });
    }
    let threshold = minimum + abs_tol(DEFAULT_TOLERANCE, minimum);
    let index = par::map_ranges(total, chunk, exec, |r| scan(r, Some(threshold)))
        .into_iter()
        .flatten()
        .map(|(_, i)| i)
        .min()
        .expect("minimum exists");

    let mut digits = vec![0; n_d];
    table.decode(index, &mut digits);
    let allocation: BTreeMap<_, _> =
        scenario.demands.iter().zip(&digits).map(|(d, &s)| (d.id, candidates[s])).collect();
    debug_assert!(check_feasibility(topology, scenario, architecture, &allocation).is_empty());
    let breakdown = evaluate(topology, scenario, &allocation)?;
    let mut node_loads = BTreeMap::new();
    for d in &scenario.demands {
        *node_loads.entry(allocation[&d.id]).or_insert(0.0) += d.load;
    }
    Ok(Solution {
        allocation,
        objective: breakdown.total_w,
        breakdown,
        optimality: Optimality { bound: minimum, gap: 0.0, proven: true },
        node_loads,
        nodes: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, make_scenario, Layout};
    use crate::topology::TopologyOptions;

    #[test]
    fn single_demand_single_host() {
        let s = make_scenario(6.0, &default_catalog(), Layout { rooms: 1, users_per_room: 1, demanding_per_room: 1 })
            .unwrap();
        let t = Topology::build(Architecture::CloudOnly, &s, &TopologyOptions::default()).unwrap();
        let sol = brute_force(&t, &s, Architecture::CloudOnly).unwrap();
        assert_eq!(sol.nodes, 1);
        assert_eq!(t.host(sol.allocation[&s.demands[0].id]).name, "CC");
    }

    #[test]
    fn enumerates_hosts_to_the_demands() {
        // 2 rooms x 4 users, 1 demanding each: 3 idle UDs + RF per room + 4 upstream = 12 hosts
        let layout = Layout { rooms: 2, users_per_room: 4, demanding_per_room: 1 };
        let s = make_scenario(8.0, &default_catalog(), layout).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let sol = brute_force(&t, &s, Architecture::PonBased).unwrap();
        assert_eq!(sol.nodes, 144);
        // 2 rooms x 3 users: 2 idle UDs + RF per room + 4 upstream = 10 hosts
        let layout = Layout { rooms: 2, users_per_room: 3, demanding_per_room: 1 };
        let s = make_scenario(8.0, &default_catalog(), layout).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        assert_eq!(brute_force(&t, &s, Architecture::PonBased).unwrap().nodes, 100);
    }

    #[test]
    fn guard_rejects_large_instances() {
        let s = make_scenario(6.0, &default_catalog(), Layout::default()).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        assert!(matches!(
            brute_force(&t, &s, Architecture::PonBased),
            Err(OptError::TooLarge { candidates: 32, demands: 8 })
        ));
    }

    #[test]
    fn sequential_matches_parallel() {
        let layout = Layout { rooms: 2, users_per_room: 4, demanding_per_room: 2 };
        let s = make_scenario(7.0, &default_catalog(), layout).unwrap();
        for arch in [Architecture::PonBased, Architecture::SpineLeaf] {
            let t = Topology::build(arch, &s, &TopologyOptions::default()).unwrap();
            let a = brute_force_with(&t, &s, arch, Execution::Sequential).unwrap();
            let b = brute_force_with(&t, &s, arch, Execution::Parallel).unwrap();
            assert_eq!(a, b);
        }
    }
}
