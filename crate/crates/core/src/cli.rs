//! Command-line entry point: `solve`, `sweep`, `compare` and `topology`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::harness::{
    compare, export_comparison_csv, export_csv, export_json, solve_point, sweep, sweep_json_path, Comparison,
    HarnessError, RowStatus, SweepResult, COMPARISON_JSON,
};
use crate::opt::{formulate, write_lp, OptError, Solution};
use crate::power::evaluate;
use crate::topology::{dump_adjacency, Architecture, Topology};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const TIME_LIMIT: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Parser)]
#[command(name = "fogalloc", version, about = "Energy-minimizing workload placement over fog backhaul networks")]
pub struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Architecture override: pon, spine_leaf or cloud_only.
    #[arg(long, global = true)]
    pub arch: Option<Architecture>,
    /// Output directory override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one load point and print the allocation.
    Solve {
        /// Per-task load in GFLOPs.
        #[arg(long)]
        load: f64,
        /// Also write the model in LP format to this file.
        #[arg(long)]
        lp: Option<PathBuf>,
    },
    /// Sweep the configured load range for one architecture.
    Sweep,
    /// Sweep all three architectures and report savings.
    Compare,
    /// Print the device adjacency of the topology at the first load point.
    Topology,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(HarnessError),
    #[error("{0}")]
    Solver(OptError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => CliError::Config(c),
            other => CliError::Harness(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Harness(HarnessError::GridMismatch { .. } | HarnessError::ScenarioMismatch { .. }) => {
                exit::CONFIG
            }
            CliError::Harness(HarnessError::Io { .. } | HarnessError::Csv { .. } | HarnessError::Json { .. }) => {
                exit::IO
            }
            CliError::Io { .. } => exit::IO,
            CliError::Solver(OptError::Infeasible { .. } | OptError::NoHostFits { .. }) => exit::INFEASIBLE,
            CliError::Solver(OptError::TimeLimit { .. }) => exit::TIME_LIMIT,
            CliError::Solver(OptError::InvalidScenario(_)) => exit::CONFIG,
            _ => exit::INTERNAL,
        }
    }
}

/// Resolves the effective configuration: flag over file over default.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(arch) = cli.arch {
        config.architecture = arch;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return exit::CONFIG;
            }
            let _ = write!(out, "{}", e.render());
            return exit::OK;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let config = resolve_config(cli)?;
    let io = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    match &cli.command {
        Command::Solve { load, lp } => cmd_solve(&config, *load, lp.as_deref(), out),
        Command::Sweep => cmd_sweep(&config, out),
        Command::Compare => cmd_compare(&config, out),
        Command::Topology => {
            let scenario = config.scenario(config.load_range.min)?;
            let t = Topology::build(config.architecture, &scenario, &config.topology_options())
                .map_err(|e| CliError::Harness(e.into()))?;
            out.write_all(dump_adjacency(&t).as_bytes()).map_err(io)?;
            Ok(exit::OK)
        }
    }
}

fn print_solution(
    out: &mut dyn Write,
    topology: &Topology,
    config: &RunConfig,
    load: f64,
    s: &Solution,
) -> std::io::Result<()> {
    writeln!(out, "architecture: {}", config.architecture)?;
    writeln!(out, "per-task load: {load} GFLOPs")?;
    writeln!(out, "{:<10} {:<4} {:>14} {:>12}", "node", "tier", "GFLOPs", "power_w")?;
    for (&host, &gflops) in &s.node_loads {
        let h = topology.host(host);
        let w = s.breakdown.per_node.get(&host).copied().unwrap_or(0.0);
        writeln!(out, "{:<10} {:<4} {:>14.6} {:>12.6}", h.name, h.tier.label(), gflops, w)?;
    }
    writeln!(out, "demand -> node:")?;
    for (d, h) in &s.allocation {
        writeln!(out, "  {d} -> {}", topology.host(*h).name)?;
    }
    writeln!(out, "processing_w: {:.6}", s.breakdown.processing_w)?;
    writeln!(out, "network_w:    {:.6}", s.breakdown.network_w)?;
    writeln!(out, "total_w:      {:.6}", s.breakdown.total_w)?;
    writeln!(out, "bound:        {:.6} (gap {:.3e}, {} nodes)", s.optimality.bound, s.optimality.gap, s.nodes)
}

pub fn cmd_solve(
    config: &RunConfig,
    load: f64,
    lp: Option<&std::path::Path>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let arch = config.architecture;
    let (topology, outcome) = solve_point(arch, load, config, Default::default())?;
    let io = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    if let Some(path) = lp {
        let scenario = config.scenario(load)?;
        let problem = formulate(&topology, &scenario, arch).map_err(CliError::Solver)?;
        std::fs::write(path, write_lp(&problem)).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    }
    match outcome {
        Ok(s) => {
            debug_assert!(evaluate(&topology, &config.scenario(load)?, &s.allocation).is_ok());
            print_solution(out, &topology, config, load, &s).map_err(io)?;
            writeln!(out, "status: optimal").map_err(io)?;
            Ok(exit::OK)
        }
        Err(OptError::TimeLimit { incumbent, bound, gap }) => {
            if let Some(s) = &incumbent {
                print_solution(out, &topology, config, load, s).map_err(io)?;
            }
            writeln!(out, "status: time limit (bound {bound:.6}, gap {gap:.3e})").map_err(io)?;
            Err(CliError::Solver(OptError::TimeLimit { incumbent, bound, gap }))
        }
        Err(e) => Err(CliError::Solver(e)),
    }
}

fn sweep_code(results: &[&SweepResult]) -> i32 {
    let statuses = || results.iter().flat_map(|r| r.rows.iter().map(|row| &row.status));
    if statuses().any(|s| matches!(s, RowStatus::TimeLimit { .. })) {
        exit::TIME_LIMIT
    } else if statuses().any(|s| matches!(s, RowStatus::Infeasible { .. })) {
        exit::INFEASIBLE
    } else {
        exit::OK
    }
}

fn write_sweep(result: &SweepResult, config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let [a, p] = export_csv(result, &config.output_dir)?;
    let json = sweep_json_path(&config.output_dir, result.architecture);
    export_json(result, &json)?;
    let io = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    writeln!(out, "wrote {}, {}, {}", a.display(), p.display(), json.display()).map_err(io)
}

pub fn cmd_sweep(config: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let result = sweep(config.architecture, config.load_range, config)?;
    let io = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    writeln!(
        out,
        "{:>10} {:>14} {:>14} {:>14}  {:<10} nodes",
        "load", "processing_w", "network_w", "total_w", "status"
    )
    .map_err(io)?;
    for r in &result.rows {
        let nodes: Vec<&str> = r.per_node.iter().map(|n| n.node_id.as_str()).collect();
        writeln!(
            out,
            "{:>10.3} {:>14.6} {:>14.6} {:>14.6}  {:<10} {}",
            r.per_task_load,
            r.processing_w,
            r.network_w,
            r.total_w,
            r.status.label(),
            nodes.join(",")
        )
        .map_err(io)?;
    }
    write_sweep(&result, config, out)?;
    Ok(sweep_code(&[&result]))
}

pub fn cmd_compare(config: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let comparison: Comparison = compare(config)?;
    let io = |source| CliError::Io { path: PathBuf::from("<stdout>"), source };
    for s in &comparison.sweeps {
        write_sweep(s, config, out)?;
    }
    let csv = export_comparison_csv(&comparison.rows, &config.output_dir)?;
    let json = config.output_dir.join(COMPARISON_JSON);
    export_json(&comparison, &json)?;
    writeln!(out, "wrote {}, {}", csv.display(), json.display()).map_err(io)?;
    if let Some(m) = &comparison.max_savings {
        writeln!(out, "maximum savings of pon (at per-task load):").map_err(io)?;
        for (name, p) in [
            ("total vs spine_leaf", m.total_vs_sl),
            ("total vs cloud_only", m.total_vs_cloud),
            ("processing vs spine_leaf", m.processing_vs_sl),
            ("processing vs cloud_only", m.processing_vs_cloud),
            ("network vs spine_leaf", m.network_vs_sl),
            ("network vs cloud_only", m.network_vs_cloud),
        ] {
            writeln!(out, "  {name:<26} {:>7.2}% ({})", 100.0 * p.value, p.per_task_load).map_err(io)?;
        }
    }
    let sweeps: Vec<&SweepResult> = comparison.sweeps.iter().collect();
    Ok(sweep_code(&sweeps))
}
