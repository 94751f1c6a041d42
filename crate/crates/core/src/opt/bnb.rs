//! Depth-first branch-and-bound over the assignment rows.
//!
//! Demands are placed one at a time. Once every `x[d,s]` is fixed the
//! cheapest activation of `a` and `y` is implied, so only assignments are
//! branched on. Children are visited cheapest-first; the incumbent rule
//! keeps, among solutions within tolerance of the best, the one whose host
//! vector is lexicographically smallest, which makes the result independent
//! of visiting order and of how the root is split across workers.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use super::{abs_tol, MilpProblem, OptError, Optimality, Sense, Solution, SolveLimits, VarRole};
use crate::par::{self, Execution};
use crate::power::CAPACITY_TOL;

/// The problem in the shape the search needs.
struct Compiled {
    n_d: usize,
    n_h: usize,
    x_cost: Vec<f64>,
    /// Inequality rows touched by each `x`, with its coefficient.
    x_rows: Vec<Vec<(usize, f64)>>,
    row_limit: Vec<f64>,
    /// Cost of the activation variable a row switches on (0 when none).
    row_switch: Vec<f64>,
    /// Switch rows every candidate of a demand crosses.
    forced: Vec<Vec<usize>>,
    host_class: Vec<Option<usize>>,
    demand_class: Vec<Option<usize>>,
    n_rows: usize,
}

impl Compiled {
    fn new(p: &MilpProblem) -> Result<Self, OptError> {
        let n_d = p.demands.len();
        let n_h = p.hosts.len();
        let n_x = n_d * n_h;
        for (i, v) in p.vars.iter().enumerate() {
            let expected = match v.role {
                VarRole::Assign { demand, host } => Some(p.x(demand, host)),
                VarRole::Activate { host } => Some(p.activation(host)),
                VarRole::Device { .. } => None,
            };
            if expected.is_some_and(|e| e != i) || (i < n_x) != matches!(v.role, VarRole::Assign { .. }) {
                return Err(OptError::Malformed(format!("variable {} out of place", v.name)));
            }
            if !(v.cost.is_finite() && v.cost >= 0.0) {
                return Err(OptError::Malformed(format!("variable {} has cost {}", v.name, v.cost)));
            }
        }

        let mut x_rows = vec![Vec::new(); n_x];
        let mut row_limit = Vec::new();
        let mut row_switch = Vec::new();
        let mut switch_seen = vec![false; p.vars.len()];
        for c in &p.constraints {
            match c.sense {
                Sense::Eq => {
                    // must be an assignment row: sum over one demand's x equals 1
                    let ok = c.rhs == 1.0
                        && c.terms.len() == n_h
                        && c.terms.iter().all(|&(v, coef)| v < n_x && coef == 1.0)
                        && c.terms.windows(2).all(|w| w[0].0 / n_h.max(1) == w[1].0 / n_h.max(1));
                    if !ok {
                        return Err(OptError::Malformed(format!("unsupported equality row {}", c.name)));
                    }
                }
                Sense::Ge => return Err(OptError::Malformed(format!("unsupported row {}", c.name))),
                Sense::Le => {
                    let r = row_limit.len();
                    let mut switch = None;
                    for &(v, coef) in &c.terms {
                        if v < n_x {
                            if coef < 0.0 {
                                return Err(OptError::Malformed(format!(
                                    "negative assignment coefficient in {}",
                                    c.name
                                )));
                            }
                            if coef > 0.0 {
                                x_rows[v].push((r, coef));
                            }
                        } else if coef < 0.0 && switch.is_none() && !switch_seen[v] && c.rhs == 0.0 {
                            switch_seen[v] = true;
                            switch = Some((v, -coef));
                        } else {
                            return Err(OptError::Malformed(format!("unsupported term in {}", c.name)));
                        }
                    }
                    match switch {
                        Some((v, cap)) => {
                            row_limit.push(c.rhs + cap);
                            row_switch.push(p.vars[v].cost);
                        }
                        None => {
                            row_limit.push(c.rhs);
                            row_switch.push(0.0);
                        }
                    }
                }
            }
        }
        let n_rows = row_limit.len();
        let forced = (0..n_d)
            .map(|d| {
                let mut common: Option<Vec<usize>> = None;
                for s in 0..n_h {
                    let rows: Vec<usize> =
                        x_rows[d * n_h + s].iter().map(|&(r, _)| r).filter(|&r| row_switch[r] > 0.0).collect();
                    common = Some(match common {
                        None => rows,
                        Some(prev) => prev.into_iter().filter(|r| rows.contains(r)).collect(),
                    });
                }
                common.unwrap_or_default()
            })
            .collect();
        let x_cost = p.vars[..n_x].iter().map(|v| v.cost).collect();
        Ok(Compiled {
            n_d,
            n_h,
            x_cost,
            x_rows,
            row_limit,
            row_switch,
            forced,
            host_class: p.host_classes.clone(),
            demand_class: p.demand_classes.clone(),
            n_rows,
        })
    }
}

struct Search<'a> {
    c: &'a Compiled,
    tol: f64,
    activity: Vec<f64>,
    host_use: Vec<u32>,
    assign: Vec<usize>,
    incumbent: Option<(f64, Vec<usize>)>,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
    /// Deepest level at which a demand had no feasible host.
    stuck_at: Option<usize>,
    shared_best: &'a AtomicU64,
    marks: Vec<u32>,
    stamp: u32,
}

impl<'a> Search<'a> {
    fn new(c: &'a Compiled, tol: f64, deadline: Option<Instant>, shared_best: &'a AtomicU64) -> Self {
        Search {
            c,
            tol,
            activity: vec![0.0; c.n_rows],
            host_use: vec![0; c.n_h],
            assign: Vec::with_capacity(c.n_d),
            incumbent: None,
            nodes: 0,
            deadline,
            timed_out: false,
            stuck_at: None,
            shared_best,
            marks: vec![0; c.n_rows],
            stamp: 0,
        }
    }

    fn fits(&self, x: usize) -> bool {
        self.c.x_rows[x]
            .iter()
            .all(|&(r, coef)| self.activity[r] + coef <= self.c.row_limit[r] * (1.0 + CAPACITY_TOL) + 1e-12)
    }

    fn increment(&self, x: usize) -> f64 {
        self.c.x_cost[x]
            + self.c.x_rows[x]
                .iter()
                .filter(|&&(r, _)| self.activity[r] == 0.0)
                .map(|&(r, _)| self.c.row_switch[r])
                .sum::<f64>()
    }

    /// Hosts worth trying for the demand at `depth`, cheapest first.
    fn candidates(&self, depth: usize) -> Vec<(f64, usize)> {
        let c = self.c;
        let mut seen_unused_class: Vec<usize> = Vec::new();
        let min_host = match (depth.checked_sub(1), c.demand_class[depth]) {
            (Some(prev), Some(class)) if c.demand_class[prev] == Some(class) => self.assign[prev],
            _ => 0,
        };
        let mut out = Vec::new();
        for s in 0..c.n_h {
            if let Some(class) = c.host_class[s] {
                if self.host_use[s] == 0 {
                    // only the first unused member of an interchangeable class
                    if seen_unused_class.contains(&class) {
                        continue;
                    }
                    seen_unused_class.push(class);
                }
            }
            if s < min_host {
                continue;
            }
            let x = depth * c.n_h + s;
            if self.fits(x) {
                out.push((self.increment(x), s));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        out
    }

    /// Lower bound on the cost of placing demands `from..`.
    fn remaining_bound(&mut self, from: usize) -> f64 {
        let c = self.c;
        let k = (c.n_d - from) as f64;
        if k == 0.0 {
            return 0.0;
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        let mut bound = 0.0;
        for d in from..c.n_d {
            for &r in &c.forced[d] {
                if self.activity[r] == 0.0 && self.marks[r] != self.stamp {
                    self.marks[r] = self.stamp;
                    bound += c.row_switch[r];
                }
            }
        }
        for d in from..c.n_d {
            let mut best = f64::INFINITY;
            for s in 0..c.n_h {
                let x = d * c.n_h + s;
                if !self.fits(x) {
                    continue;
                }
                let shared: f64 = c.x_rows[x]
                    .iter()
                    .filter(|&&(r, _)| self.activity[r] == 0.0 && self.marks[r] != self.stamp)
                    .map(|&(r, _)| c.row_switch[r])
                    .sum();
                best = best.min(c.x_cost[x] + shared / k);
            }
            if best == f64::INFINITY {
                return best;
            }
            bound += best;
        }
        bound
    }

    fn apply(&mut self, depth: usize, s: usize, undo: &mut Vec<(usize, f64)>) {
        let x = depth * self.c.n_h + s;
        for &(r, coef) in &self.c.x_rows[x] {
            undo.push((r, self.activity[r]));
            self.activity[r] += coef;
        }
        self.host_use[s] += 1;
        self.assign.push(s);
    }

    fn revert(&mut self, s: usize, undo: &mut Vec<(usize, f64)>) {
        for (r, old) in undo.drain(..).rev() {
            self.activity[r] = old;
        }
        self.host_use[s] -= 1;
        self.assign.pop();
    }

    fn shared(&self) -> f64 {
        f64::from_bits(self.shared_best.load(Ordering::Relaxed))
    }

    fn prune(&self, bound: f64) -> bool {
        let global = self.shared();
        if bound > global + abs_tol(self.tol, global) {
            return true;
        }
        match &self.incumbent {
            None => false,
            Some((v, best)) => {
                let slack = abs_tol(self.tol, *v);
                bound > v + slack || (bound >= v - slack && best[..self.assign.len()] < self.assign[..])
            }
        }
    }

    fn offer(&mut self, value: f64) {
        let better = match &self.incumbent {
            None => true,
            Some((v, best)) => {
                let slack = abs_tol(self.tol, *v);
                value < v - slack || (value <= v + slack && self.assign < *best)
            }
        };
        if better {
            self.incumbent = Some((value, self.assign.clone()));
            let _ = self.shared_best.fetch_update(Ordering::Relaxed, Ordering::Relaxed, |bits| {
                (value < f64::from_bits(bits)).then_some(value.to_bits())
            });
        }
    }

    fn explore(&mut self, depth: usize, cost: f64) {
        self.nodes += 1;
        if self.nodes % 2048 == 1 {
            if let Some(deadline) = self.deadline {
                if Instant::now() >= deadline {
                    self.timed_out = true;
                }
            }
        }
        if self.timed_out {
            return;
        }
        if depth == self.c.n_d {
            self.offer(cost);
            return;
        }
        let cands = self.candidates(depth);
        if cands.is_empty() {
            self.stuck_at = Some(self.stuck_at.map_or(depth, |s| s.max(depth)));
            return;
        }
        let mut undo = Vec::new();
        for (inc, s) in cands {
            self.apply(depth, s, &mut undo);
            let next = cost + inc;
            let bound = next + self.remaining_bound(depth + 1);
            if !self.prune(bound) {
                self.explore(depth + 1, next);
            }
            self.revert(s, &mut undo);
            if self.timed_out {
                return;
            }
        }
    }
}

struct Outcome {
    incumbent: Option<(f64, Vec<usize>)>,
    nodes: u64,
    timed_out: bool,
    stuck_at: Option<usize>,
}

/// Solves to proven optimality using the default execution strategy.
pub fn solve_exact(problem: &MilpProblem, limits: &SolveLimits) -> Result<Solution, OptError> {
    solve_exact_with(problem, limits, Execution::default())
}

pub fn solve_exact_with(problem: &MilpProblem, limits: &SolveLimits, exec: Execution) -> Result<Solution, OptError> {
    let compiled = Compiled::new(problem)?;
    let tol = limits.tolerance;
    let deadline = (limits.time_seconds.is_finite() && limits.time_seconds > 0.0)
        .then(|| Instant::now() + Duration::from_secs_f64(limits.time_seconds));
    let shared = AtomicU64::new(f64::INFINITY.to_bits());

    let root_bound = {
        let mut s = Search::new(&compiled, tol, deadline, &shared);
        s.remaining_bound(0)
    };

    let outcomes: Vec<Outcome> = if compiled.n_d == 0 {
        vec![Outcome { incumbent: Some((0.0, Vec::new())), nodes: 1, timed_out: false, stuck_at: None }]
    } else if exec.is_parallel() && compiled.n_d > 1 {
        let root = Search::new(&compiled, tol, deadline, &shared);
        let first = root.candidates(0);
        if first.is_empty() {
            vec![Outcome { incumbent: None, nodes: 1, timed_out: false, stuck_at: Some(0) }]
        } else {
            par::map(&first, exec, |&(inc, s)| {
                let mut search = Search::new(&compiled, tol, deadline, &shared);
                let mut undo = Vec::new();
                search.apply(0, s, &mut undo);
                let bound = inc + search.remaining_bound(1);
                if !search.prune(bound) {
                    search.explore(1, inc);
                }
                Outcome {
                    incumbent: search.incumbent,
                    nodes: search.nodes,
                    timed_out: search.timed_out,
                    stuck_at: search.stuck_at,
                }
            })
        }
    } else {
        let mut search = Search::new(&compiled, tol, deadline, &shared);
        search.explore(0, 0.0);
        vec![Outcome {
            incumbent: search.incumbent,
            nodes: search.nodes,
            timed_out: search.timed_out,
            stuck_at: search.stuck_at,
        }]
    };

    let nodes = outcomes.iter().map(|o| o.nodes).sum();
    let timed_out = outcomes.iter().any(|o| o.timed_out);
    let stuck_at = outcomes.iter().filter_map(|o| o.stuck_at).max();
    let best_value = outcomes.iter().filter_map(|o| o.incumbent.as_ref().map(|i| i.0)).fold(f64::INFINITY, f64::min);
    let winner = outcomes
        .into_iter()
        .filter_map(|o| o.incumbent)
        .filter(|(v, _)| *v <= best_value + abs_tol(tol, best_value))
        .min_by(|a, b| a.1.cmp(&b.1));

    match (winner, timed_out) {
        (Some((_, assign)), false) => {
            let mut sol =
                Solution::from_assignment(problem, &assign, Optimality { bound: 0.0, gap: 0.0, proven: true }, nodes);
            sol.optimality.bound = sol.objective;
            sol.optimality.gap = 0.0;
            Ok(sol)
        }
        (incumbent, true) => {
            let incumbent = incumbent.map(|(_, assign)| {
                Box::new(Solution::from_assignment(
                    problem,
                    &assign,
                    Optimality { bound: root_bound, gap: 0.0, proven: false },
                    nodes,
                ))
            });
            let gap = incumbent.as_ref().map_or(f64::INFINITY, |s| s.optimality.gap);
            Err(OptError::TimeLimit { incumbent, bound: root_bound, gap })
        }
        (None, false) => Err(OptError::Infeasible { demand: problem.demands[stuck_at.unwrap_or(0)] }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, make_scenario, Layout, Tier};
    use crate::opt::formulate;
    use crate::topology::{Architecture, Topology, TopologyOptions};

    fn solve(arch: Architecture, load: f64, exec: Execution) -> (Topology, Solution) {
        let s = make_scenario(load, &default_catalog(), Layout::default()).unwrap();
        let t = Topology::build(arch, &s, &TopologyOptions::default()).unwrap();
        let p = formulate(&t, &s, arch).unwrap();
        let sol = solve_exact_with(&p, &SolveLimits::default(), exec).unwrap();
        (t, sol)
    }

    #[test]
    fn cloud_only_forces_everything_to_the_cloud() {
        let (t, sol) = solve(Architecture::CloudOnly, 6.0, Execution::Sequential);
        assert!(sol.allocation.values().all(|&h| t.host(h).tier == Tier::Cloud));
        assert!(sol.optimality.proven);
    }

    #[test]
    fn pon_at_six_consolidates_on_one_room_fog() {
        let (t, sol) = solve(Architecture::PonBased, 6.0, Execution::Sequential);
        let hosts: std::collections::BTreeSet<_> = sol.allocation.values().collect();
        assert_eq!(hosts.len(), 1);
        let h = t.host(**hosts.iter().next().unwrap());
        assert_eq!(h.tier, Tier::RoomFog);
        assert_eq!(h.name, "r1RF");
    }

    #[test]
    fn sequential_and_parallel_agree() {
        for load in [6.0, 9.0, 12.0] {
            for arch in [Architecture::PonBased, Architecture::SpineLeaf] {
                let (_, a) = solve(arch, load, Execution::Sequential);
                let (_, b) = solve(arch, load, Execution::Parallel);
                assert_eq!(a.allocation, b.allocation, "{arch} {load}");
                assert!((a.objective - b.objective).abs() <= 1e-9 * a.objective);
            }
        }
    }

    #[test]
    fn infeasible_reports_a_demand() {
        let mut c = default_catalog();
        // the cloud takes one task but not two
        c.processing.get_mut(&Tier::Cloud).unwrap().capacity = 15.0;
        let s = make_scenario(10.0, &c, Layout { rooms: 1, users_per_room: 2, demanding_per_room: 2 }).unwrap();
        let t = Topology::build(Architecture::CloudOnly, &s, &TopologyOptions::default()).unwrap();
        let p = formulate(&t, &s, Architecture::CloudOnly).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            match solve_exact_with(&p, &SolveLimits::default(), exec) {
                Err(OptError::Infeasible { demand }) => assert_eq!(demand, s.demands[1].id),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn tiny_time_limit_reports_incumbent_or_gap() {
        let s = make_scenario(9.0, &default_catalog(), Layout::default()).unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let p = formulate(&t, &s, Architecture::PonBased).unwrap();
        let limits = SolveLimits { time_seconds: 1e-9, ..Default::default() };
        for exec in [Execution::Sequential, Execution::Parallel] {
            match solve_exact_with(&p, &limits, exec) {
                Err(OptError::TimeLimit { incumbent, bound, gap }) => {
                    assert!(bound > 0.0);
                    assert!(incumbent.is_none() && gap == f64::INFINITY);
                }
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn rejects_unsupported_rows() {
        let s = make_scenario(6.0, &default_catalog(), Layout { rooms: 1, users_per_room: 2, demanding_per_room: 1 })
            .unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let mut p = formulate(&t, &s, Architecture::PonBased).unwrap();
        p.constraints[0].sense = Sense::Ge;
        assert!(matches!(solve_exact(&p, &SolveLimits::default()), Err(OptError::Malformed(_))));
    }
}
