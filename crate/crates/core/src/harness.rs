//! Load sweeps per architecture, cross-architecture comparison and export.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{DemandId, Tier};
use crate::config::{ConfigError, LoadRange, RunConfig};
use crate::opt::{formulate, solve_exact_with, OptError, Solution};
use crate::par::{self, Execution};
use crate::power::{evaluate, PowerError};
use crate::topology::{Architecture, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("solver failed at load {load}: {source}")]
    Solver { load: f64, source: OptError },
    #[error("load grids differ: {first} has {a:?}, {second} has {b:?}")]
    GridMismatch { first: Architecture, second: Architecture, a: Vec<f64>, b: Vec<f64> },
    #[error("sweeps use different layouts or catalogs ({first} vs {second})")]
    ScenarioMismatch { first: Architecture, second: Architecture },
    #[error("expected a {expected} sweep, got {got}")]
    WrongArchitecture { expected: Architecture, got: Architecture },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowStatus {
    Optimal,
    /// The solver stopped early. The row holds the incumbent and its gap,
    /// or nothing when no allocation was found in time.
    TimeLimit {
        gap: Option<f64>,
    },
    Infeasible {
        demand: DemandId,
    },
}

impl RowStatus {
    pub fn label(&self) -> &'static str {
        match self {
            RowStatus::Optimal => "optimal",
            RowStatus::TimeLimit { .. } => "time_limit",
            RowStatus::Infeasible { .. } => "infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAssignment {
    pub node_id: String,
    pub tier: Tier,
    pub assigned_gflops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub per_task_load: f64,
    /// GFLOPs per tier, every tier present.
    pub per_tier: BTreeMap<Tier, f64>,
    /// Active hosts in canonical order.
    pub per_node: Vec<NodeAssignment>,
    pub processing_w: f64,
    pub network_w: f64,
    pub total_w: f64,
    pub status: RowStatus,
}

impl SweepRow {
    pub fn active_nodes(&self) -> usize {
        self.per_node.len()
    }

    pub fn active_of(&self, tier: Tier) -> usize {
        self.per_node.iter().filter(|n| n.tier == tier).count()
    }

    pub fn assigned_gflops(&self) -> f64 {
        self.per_node.iter().map(|n| n.assigned_gflops).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub architecture: Architecture,
    pub config: RunConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn loads(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.per_task_load).collect()
    }

    pub fn all_optimal(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Optimal)
    }
}

/// Solves one load point; returns the topology alongside so callers can name hosts.
pub fn solve_point(
    architecture: Architecture,
    load: f64,
    config: &RunConfig,
    exec: Execution,
) -> Result<(Topology, Result<Solution, OptError>), HarnessError> {
    let scenario = config.scenario(load)?;
    let topology = Topology::build(architecture, &scenario, &config.topology_options())?;
    let solution =
        formulate(&topology, &scenario, architecture).and_then(|p| solve_exact_with(&p, &config.solver, exec));
    Ok((topology, solution))
}

fn row(architecture: Architecture, load: f64, config: &RunConfig, exec: Execution) -> Result<SweepRow, HarnessError> {
    let scenario = config.scenario(load)?;
    let (topology, outcome) = solve_point(architecture, load, config, exec)?;
    let (solution, status) = match outcome {
        Ok(s) => (Some(s), RowStatus::Optimal),
        Err(OptError::TimeLimit { incumbent, gap, .. }) => {
            let gap = incumbent.is_some().then_some(gap);
            (incumbent.map(|b| *b), RowStatus::TimeLimit { gap })
        }
        Err(OptError::Infeasible { demand } | OptError::NoHostFits { demand, .. }) => {
            (None, RowStatus::Infeasible { demand })
        }
        Err(source) => return Err(HarnessError::Solver { load, source }),
    };
    let mut per_tier: BTreeMap<Tier, f64> = Tier::ALL.iter().map(|&t| (t, 0.0)).collect();
    let mut per_node = Vec::new();
    let (mut processing_w, mut network_w, mut total_w) = (0.0, 0.0, 0.0);
    if let Some(solution) = solution {
        for (&host, &load) in &solution.node_loads {
            let h = topology.host(host);
            *per_tier.get_mut(&h.tier).expect("all tiers") += load;
            per_node.push(NodeAssignment { node_id: h.name.clone(), tier: h.tier, assigned_gflops: load });
        }
        let b = evaluate(&topology, &scenario, &solution.allocation)?;
        (processing_w, network_w, total_w) = (b.processing_w, b.network_w, b.total_w);
    }
    Ok(SweepRow { per_task_load: load, per_tier, per_node, processing_w, network_w, total_w, status })
}

pub fn sweep(architecture: Architecture, range: LoadRange, config: &RunConfig) -> Result<SweepResult, HarnessError> {
    sweep_with(architecture, range, config, Execution::default())
}

/// Solves every load point of `range`. Rows run concurrently under
/// `Execution::Parallel`; each solve is sequential then.
pub fn sweep_with(
    architecture: Architecture,
    range: LoadRange,
    config: &RunConfig,
    exec: Execution,
) -> Result<SweepResult, HarnessError> {
    config.validate()?;
    let loads = range.points()?;
    let rows = par::map(&loads, exec, |&load| row(architecture, load, config, Execution::Sequential))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mut echo = config.clone();
    echo.architecture = architecture;
    echo.load_range = range;
    Ok(SweepResult { architecture, config: echo, rows })
}

/// `1 - pon / other`; zero when the reference draws nothing.
pub fn savings(pon: f64, other: f64) -> f64 {
    if other == 0.0 {
        0.0
    } else {
        1.0 - pon / other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub per_task_load: f64,
    pub pon_total_w: f64,
    pub sl_total_w: f64,
    pub cloud_total_w: f64,
    pub savings_vs_sl: f64,
    pub savings_vs_cloud: f64,
    pub pon_processing_w: f64,
    pub sl_processing_w: f64,
    pub cloud_processing_w: f64,
    pub processing_savings_vs_sl: f64,
    pub processing_savings_vs_cloud: f64,
    pub pon_network_w: f64,
    pub sl_network_w: f64,
    pub cloud_network_w: f64,
    pub network_savings_vs_sl: f64,
    pub network_savings_vs_cloud: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub value: f64,
    pub per_task_load: f64,
}

/// Largest savings across the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxSavings {
    pub total_vs_sl: Peak,
    pub total_vs_cloud: Peak,
    pub processing_vs_sl: Peak,
    pub processing_vs_cloud: Peak,
    pub network_vs_sl: Peak,
    pub network_vs_cloud: Peak,
}

impl MaxSavings {
    pub fn of(rows: &[ComparisonRow]) -> Option<Self> {
        let peak = |f: fn(&ComparisonRow) -> f64| {
            rows.iter().map(|r| Peak { value: f(r), per_task_load: r.per_task_load }).reduce(|a, b| {
                if b.value > a.value {
                    b
                } else {
                    a
                }
            })
        };
        Some(Self {
            total_vs_sl: peak(|r| r.savings_vs_sl)?,
            total_vs_cloud: peak(|r| r.savings_vs_cloud)?,
            processing_vs_sl: peak(|r| r.processing_savings_vs_sl)?,
            processing_vs_cloud: peak(|r| r.processing_savings_vs_cloud)?,
            network_vs_sl: peak(|r| r.network_savings_vs_sl)?,
            network_vs_cloud: peak(|r| r.network_savings_vs_cloud)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config: RunConfig,
    pub rows: Vec<ComparisonRow>,
    pub max_savings: Option<MaxSavings>,
    pub sweeps: Vec<SweepResult>,
}

fn same_scenario(a: &RunConfig, b: &RunConfig) -> bool {
    a.layout == b.layout && a.catalog == b.catalog
}

/// Joins PON, SL and cloud-only sweeps row by row.
pub fn compare_sweeps(
    pon: &SweepResult,
    sl: &SweepResult,
    cloud: &SweepResult,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    for (s, expected) in
        [(pon, Architecture::PonBased), (sl, Architecture::SpineLeaf), (cloud, Architecture::CloudOnly)]
    {
        if s.architecture != expected {
            return Err(HarnessError::WrongArchitecture { expected, got: s.architecture });
        }
    }
    for other in [sl, cloud] {
        if pon.loads() != other.loads() {
            return Err(HarnessError::GridMismatch {
                first: pon.architecture,
                second: other.architecture,
                a: pon.loads(),
                b: other.loads(),
            });
        }
        if !same_scenario(&pon.config, &other.config) {
            return Err(HarnessError::ScenarioMismatch { first: pon.architecture, second: other.architecture });
        }
    }
    Ok(pon
        .rows
        .iter()
        .zip(&sl.rows)
        .zip(&cloud.rows)
        .map(|((p, s), c)| ComparisonRow {
            per_task_load: p.per_task_load,
            pon_total_w: p.total_w,
            sl_total_w: s.total_w,
            cloud_total_w: c.total_w,
            savings_vs_sl: savings(p.total_w, s.total_w),
            savings_vs_cloud: savings(p.total_w, c.total_w),
            pon_processing_w: p.processing_w,
            sl_processing_w: s.processing_w,
            cloud_processing_w: c.processing_w,
            processing_savings_vs_sl: savings(p.processing_w, s.processing_w),
            processing_savings_vs_cloud: savings(p.processing_w, c.processing_w),
            pon_network_w: p.network_w,
            sl_network_w: s.network_w,
            cloud_network_w: c.network_w,
            network_savings_vs_sl: savings(p.network_w, s.network_w),
            network_savings_vs_cloud: savings(p.network_w, c.network_w),
        })
        .collect())
}

pub fn compare(config: &RunConfig) -> Result<Comparison, HarnessError> {
    compare_with(config, Execution::default())
}

/// Sweeps all three architectures (each over `config.range_for`) and joins them.
pub fn compare_with(config: &RunConfig, exec: Execution) -> Result<Comparison, HarnessError> {
    config.validate()?;
    let grids: Vec<Vec<f64>> =
        Architecture::ALL.iter().map(|&a| config.range_for(a).points()).collect::<Result<_, _>>()?;
    for (i, g) in grids.iter().enumerate().skip(1) {
        if *g != grids[0] {
            return Err(HarnessError::GridMismatch {
                first: Architecture::ALL[0],
                second: Architecture::ALL[i],
                a: grids[0].clone(),
                b: g.clone(),
            });
        }
    }
    let sweeps = Architecture::ALL
        .iter()
        .map(|&a| sweep_with(a, config.range_for(a), config, exec))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = compare_sweeps(&sweeps[0], &sweeps[1], &sweeps[2])?;
    Ok(Comparison { config: config.clone(), max_savings: MaxSavings::of(&rows), rows, sweeps })
}

/// Fixed-point formatting used by every CSV column.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn allocation_csv_path(dir: &Path, architecture: Architecture) -> PathBuf {
    dir.join(format!("{}_allocation.csv", architecture.slug()))
}

pub fn power_csv_path(dir: &Path, architecture: Architecture) -> PathBuf {
    dir.join(format!("{}_power.csv", architecture.slug()))
}

pub fn sweep_json_path(dir: &Path, architecture: Architecture) -> PathBuf {
    dir.join(format!("{}_sweep.json", architecture.slug()))
}

pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARISON_JSON: &str = "comparison.json";

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io { path: dir.to_owned(), source })
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), HarnessError> {
    let csv_err = |source| HarnessError::Csv { path: path.to_owned(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| HarnessError::Io { path: path.to_owned(), source })
}

pub const ALLOCATION_HEADER: [&str; 4] = ["load_gflops", "node_id", "tier", "assigned_gflops"];
pub const POWER_HEADER: [&str; 6] = ["load_gflops", "architecture", "processing_w", "network_w", "total_w", "status"];
pub const COMPARISON_HEADER: [&str; 16] = [
    "load_gflops",
    "pon_total_w",
    "sl_total_w",
    "cloud_total_w",
    "savings_vs_sl",
    "savings_vs_cloud",
    "pon_processing_w",
    "sl_processing_w",
    "cloud_processing_w",
    "processing_savings_vs_sl",
    "processing_savings_vs_cloud",
    "pon_network_w",
    "sl_network_w",
    "cloud_network_w",
    "network_savings_vs_sl",
    "network_savings_vs_cloud",
];

/// Writes `<arch>_allocation.csv` and `<arch>_power.csv` into `dir`.
pub fn export_csv(result: &SweepResult, dir: &Path) -> Result<[PathBuf; 2], HarnessError> {
    create_dir(dir)?;
    let allocation = allocation_csv_path(dir, result.architecture);
    write_rows(
        &allocation,
        &ALLOCATION_HEADER,
        result.rows.iter().flat_map(|r| {
            r.per_node.iter().map(|n| {
                vec![
                    fmt_num(r.per_task_load),
                    n.node_id.clone(),
                    n.tier.label().to_string(),
                    fmt_num(n.assigned_gflops),
                ]
            })
        }),
    )?;
    let power = power_csv_path(dir, result.architecture);
    write_rows(
        &power,
        &POWER_HEADER,
        result.rows.iter().map(|r| {
            vec![
                fmt_num(r.per_task_load),
                result.architecture.slug().to_string(),
                fmt_num(r.processing_w),
                fmt_num(r.network_w),
                fmt_num(r.total_w),
                r.status.label().to_string(),
            ]
        }),
    )?;
    Ok([allocation, power])
}

pub fn export_comparison_csv(rows: &[ComparisonRow], dir: &Path) -> Result<PathBuf, HarnessError> {
    create_dir(dir)?;
    let path = dir.join(COMPARISON_CSV);
    write_rows(
        &path,
        &COMPARISON_HEADER,
        rows.iter().map(|r| {
            [
                r.per_task_load,
                r.pon_total_w,
                r.sl_total_w,
                r.cloud_total_w,
                r.savings_vs_sl,
                r.savings_vs_cloud,
                r.pon_processing_w,
                r.sl_processing_w,
                r.cloud_processing_w,
                r.processing_savings_vs_sl,
                r.processing_savings_vs_cloud,
                r.pon_network_w,
                r.sl_network_w,
                r.cloud_network_w,
                r.network_savings_vs_sl,
                r.network_savings_vs_cloud,
            ]
            .into_iter()
            .map(fmt_num)
            .collect()
        }),
    )?;
    Ok(path)
}

/// Lossless JSON dump of any result.
pub fn export_json<T: Serialize>(value: &T, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let io_err = |source| HarnessError::Io { path: path.to_owned(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|source| HarnessError::Json { path: path.to_owned(), source })?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.to_owned(), source })?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.to_owned(), source })
}
