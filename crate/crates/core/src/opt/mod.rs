//! Allocation MILP: formulation, exact branch-and-bound, LP relaxation bound
//! and an exhaustive oracle for small instances.
//!
//! The model has binary assignment variables `x[d,s]` (demand `d` served by
//! host `s`), host activation variables `a[s]` and device activation
//! variables `y[e]`. Routing is fixed by the topology, so there are no flow
//! variables: every `x[d,s]` carries its precomputed path into the device
//! and wavelength capacity rows.

mod bnb;
mod brute;
mod canonical;
mod feasibility;
mod formulate;
mod lp_format;
mod relax;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{DemandId, Violation};
use crate::power::{PowerBreakdown, PowerError};
use crate::topology::{Channel, DeviceId, HostId, TopologyError};

pub use bnb::{solve_exact, solve_exact_with};
pub use brute::{brute_force, brute_force_with, BRUTE_FORCE_LIMIT};
pub use canonical::{canonicalize, lex_cmp};
pub use feasibility::{check_feasibility, FeasibilityViolation};
pub use formulate::formulate;
pub use lp_format::write_lp;
pub use relax::lp_bound;

/// Relative tolerance on every objective comparison.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarRole {
    /// `x[d,s]`, by position in `MilpProblem::demands` / `hosts`.
    Assign { demand: usize, host: usize },
    /// `a[s]`
    Activate { host: usize },
    /// `y[e]`
    Device { device: DeviceId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Var {
    pub name: String,
    pub role: VarRole,
    /// Objective coefficient in watts.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Each demand goes to exactly one host.
    Assignment { demand: usize },
    /// Load on a host stays within its effective capacity; activates `a[s]`.
    NodeCapacity { host: usize },
    /// Traffic through a device stays within its capacity; activates `y[e]`.
    DeviceCapacity { device: DeviceId },
    /// Traffic on one wavelength channel instance.
    Wavelength { channel: Channel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub kind: ConstraintKind,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A linear model over binaries plus the bookkeeping needed to map a
/// solution back to demands, hosts and devices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub vars: Vec<Var>,
    pub constraints: Vec<Constraint>,
    pub demands: Vec<DemandId>,
    pub demand_loads: Vec<f64>,
    /// Candidate hosts in canonical order.
    pub hosts: Vec<HostId>,
    pub host_names: Vec<String>,
    /// W per GFLOP above idle, per host.
    pub host_slopes: Vec<f64>,
    /// W per Gbps above idle, keyed by device variable index.
    pub device_slopes: BTreeMap<usize, f64>,
    /// Hosts sharing a class are interchangeable; `None` for unique hosts.
    pub host_classes: Vec<Option<usize>>,
    /// Demands sharing a class are interchangeable.
    pub demand_classes: Vec<Option<usize>>,
}

impl MilpProblem {
    pub fn x(&self, demand: usize, host: usize) -> usize {
        demand * self.hosts.len() + host
    }

    pub fn activation(&self, host: usize) -> usize {
        self.demands.len() * self.hosts.len() + host
    }

    pub fn assignment_count(&self) -> usize {
        self.demands.len() * self.hosts.len()
    }

    pub fn count(&self, pred: impl Fn(&ConstraintKind) -> bool) -> usize {
        self.constraints.iter().filter(|c| pred(&c.kind)).count()
    }

    /// Objective of a full binary point.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum()
    }

    /// The cheapest completion of an assignment (`host index per demand`):
    /// activation variables set exactly where something flows.
    pub fn complete(&self, assignment: &[usize]) -> Vec<f64> {
        let mut values = vec![0.0; self.vars.len()];
        for (d, &s) in assignment.iter().enumerate() {
            values[self.x(d, s)] = 1.0;
        }
        for c in &self.constraints {
            let Some(&(switch, _)) = c.terms.iter().find(|(_, coef)| *coef < 0.0) else {
                continue;
            };
            let active: f64 = c.terms.iter().filter(|(_, coef)| *coef > 0.0).map(|&(v, coef)| coef * values[v]).sum();
            if active > c.rhs {
                values[switch] = 1.0;
            }
        }
        values
    }

    /// Power breakdown of an assignment from the model coefficients alone.
    pub fn breakdown(&self, assignment: &[usize]) -> PowerBreakdown {
        let values = self.complete(assignment);
        let mut per_node = BTreeMap::new();
        for (s, &host) in self.hosts.iter().enumerate() {
            let load: f64 =
                assignment.iter().enumerate().filter(|(_, &a)| a == s).map(|(d, _)| self.demand_loads[d]).sum();
            if load > 0.0 {
                let idle = self.vars[self.activation(s)].cost;
                per_node.insert(host, idle + self.host_slopes[s] * load);
            }
        }
        let mut per_device = BTreeMap::new();
        for c in &self.constraints {
            let ConstraintKind::DeviceCapacity { device } = c.kind else { continue };
            let Some(&(switch, _)) = c.terms.iter().find(|(_, coef)| *coef < 0.0) else { continue };
            if values[switch] == 0.0 {
                continue;
            }
            let traffic: f64 = c.terms.iter().filter(|(_, coef)| *coef > 0.0).map(|&(v, coef)| coef * values[v]).sum();
            per_device.insert(device, self.vars[switch].cost + self.device_slopes[&switch] * traffic);
        }
        PowerBreakdown::from_parts(per_node, per_device)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimality {
    /// Best proven lower bound on the objective.
    pub bound: f64,
    /// `(objective - bound) / max(1, |objective|)`.
    pub gap: f64,
    pub proven: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: BTreeMap<DemandId, HostId>,
    pub objective: f64,
    pub breakdown: PowerBreakdown,
    pub optimality: Optimality,
    pub node_loads: BTreeMap<HostId, f64>,
    /// Branch-and-bound nodes visited, or candidates enumerated by the oracle.
    pub nodes: u64,
}

impl Solution {
    /// Hosts in demand order; the vector the canonical tie-break compares.
    pub fn assignment_vector(&self) -> Vec<HostId> {
        self.allocation.values().copied().collect()
    }

    pub fn active_hosts(&self) -> usize {
        self.node_loads.values().filter(|&&l| l > 0.0).count()
    }

    pub(crate) fn from_assignment(
        problem: &MilpProblem,
        assignment: &[usize],
        optimality: Optimality,
        nodes: u64,
    ) -> Self {
        let values = problem.complete(assignment);
        let objective = problem.objective_value(&values);
        let mut allocation = BTreeMap::new();
        let mut node_loads = BTreeMap::new();
        for (d, &s) in assignment.iter().enumerate() {
            allocation.insert(problem.demands[d], problem.hosts[s]);
            *node_loads.entry(problem.hosts[s]).or_insert(0.0) += problem.demand_loads[d];
        }
        let gap = relative_gap(objective, optimality.bound);
        Solution {
            allocation,
            objective,
            breakdown: problem.breakdown(assignment),
            optimality: Optimality { gap, ..optimality },
            node_loads,
            nodes,
        }
    }
}

pub(crate) fn relative_gap(objective: f64, bound: f64) -> f64 {
    ((objective - bound) / objective.abs().max(1.0)).max(0.0)
}

/// Absolute slack corresponding to a relative tolerance around `value`.
pub(crate) fn abs_tol(tolerance: f64, value: f64) -> f64 {
    tolerance * value.abs().max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveLimits {
    pub time_seconds: f64,
    pub tolerance: f64,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self { time_seconds: 60.0, tolerance: DEFAULT_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("scenario is invalid: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("demand {demand} fits no candidate host (load {load} GFLOPs)")]
    NoHostFits { demand: DemandId, load: f64 },
    #[error("no feasible allocation; demand {demand} cannot be placed")]
    Infeasible { demand: DemandId },
    #[error("time limit reached (bound {bound}, gap {gap})")]
    TimeLimit { incumbent: Option<Box<Solution>>, bound: f64, gap: f64 },
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("{candidates}^{demands} assignments exceed the enumeration limit")]
    TooLarge { candidates: usize, demands: usize },
    #[error("candidates differ by {difference} W, more than the tie tolerance")]
    NotATie { difference: f64 },
    #[error("no candidate solutions")]
    Empty,
    #[error("LP relaxation failed: {0}")]
    Relaxation(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}
