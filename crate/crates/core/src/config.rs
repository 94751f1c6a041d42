//! Serializable run configuration. Every field has a default, so an empty
//! JSON object describes the canonical scenario.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    default_catalog, validate_scenario, CatalogError, DeviceCatalog, DeviceKind, Layout, Scenario, ScenarioError, Tier,
    Violation,
};
use crate::opt::SolveLimits;
use crate::topology::{Architecture, TopologyOptions};

/// Most load points a single range may expand to.
pub const MAX_LOAD_POINTS: usize = 100_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario violates its constraints: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("load must be positive and finite, got {0}")]
    NonPositiveLoad(f64),
    #[error("invalid load range {min}..{max} step {step}: {reason}")]
    LoadRange { min: f64, max: f64, step: f64, reason: &'static str },
    #[error("solver {name} must be positive, got {value}")]
    Solver { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for LoadRange {
    fn default() -> Self {
        Self { min: 6.0, max: 20.0, step: 1.0 }
    }
}

impl LoadRange {
    /// Load points `min, min + step, ...` up to and including `max`.
    pub fn points(&self) -> Result<Vec<f64>, ConfigError> {
        let err = |reason| ConfigError::LoadRange { min: self.min, max: self.max, step: self.step, reason };
        if !(self.min.is_finite() && self.min > 0.0) {
            return Err(err("min must be positive"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(err("step must be positive"));
        }
        if !(self.max.is_finite() && self.max >= self.min) {
            return Err(err("max must not be below min"));
        }
        let span = (self.max - self.min) / self.step;
        if span >= MAX_LOAD_POINTS as f64 {
            return Err(err("too many load points"));
        }
        let n = (span + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.min + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    /// Replaces `idle_fraction_processing * p_max` for this tier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_idle: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_idle: Option<f64>,
}

/// Changes applied on top of the default device catalog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatalogOverrides {
    pub processing: BTreeMap<Tier, ProcessingOverride>,
    pub network: BTreeMap<DeviceKind, NetworkOverride>,
    pub idle_fraction_processing: f64,
    pub capacity_margin: f64,
    /// Gbps of traffic per GFLOP of demand.
    pub drr: f64,
    pub wavelength_capacity: f64,
    pub per_user_ap_rate: f64,
    pub n_core: usize,
    pub allow_self_processing: bool,
}

impl Default for CatalogOverrides {
    fn default() -> Self {
        let c = default_catalog();
        let t = TopologyOptions::default();
        Self {
            processing: BTreeMap::new(),
            network: BTreeMap::new(),
            idle_fraction_processing: c.idle_fraction_processing,
            capacity_margin: c.capacity_margin,
            drr: c.drr,
            wavelength_capacity: c.wavelength_capacity,
            per_user_ap_rate: c.per_user_ap_rate,
            n_core: t.n_core,
            allow_self_processing: t.allow_self_processing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub architecture: Architecture,
    pub layout: Layout,
    pub load_range: LoadRange,
    /// Per-architecture grids for `compare`; absent entries use `load_range`.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub compare_load_ranges: BTreeMap<Architecture, LoadRange>,
    pub catalog: CatalogOverrides,
    pub solver: SolveLimits,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::PonBased,
            layout: Layout::default(),
            load_range: LoadRange::default(),
            compare_load_ranges: BTreeMap::new(),
            catalog: CatalogOverrides::default(),
            solver: SolveLimits::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: RunConfig =
            serde_json::from_str(text).map_err(|source| ConfigError::Parse { path: path.to_owned(), source })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_owned(), source })?;
        Self::from_json(&text, path)
    }

    /// The default catalog with every override applied and validated.
    pub fn device_catalog(&self) -> Result<DeviceCatalog, ConfigError> {
        let o = &self.catalog;
        let mut c = default_catalog();
        c.set_idle_fraction(o.idle_fraction_processing);
        c.capacity_margin = o.capacity_margin;
        c.drr = o.drr;
        c.wavelength_capacity = o.wavelength_capacity;
        c.per_user_ap_rate = o.per_user_ap_rate;
        for (tier, p) in &o.processing {
            let spec = c.processing.get_mut(tier).expect("every tier has an entry");
            if let Some(v) = p.capacity {
                spec.capacity = v;
            }
            if let Some(v) = p.p_max {
                spec.p_max = v;
                spec.p_idle = o.idle_fraction_processing * v;
            }
            if let Some(v) = p.p_idle {
                spec.p_idle = v;
            }
        }
        for (kind, n) in &o.network {
            let spec = c.network.get_mut(kind).expect("every kind has an entry");
            if let Some(v) = n.capacity {
                spec.capacity = v;
            }
            if let Some(v) = n.p_max {
                spec.p_max = v;
            }
            if let Some(v) = n.p_idle {
                spec.p_idle = v;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn topology_options(&self) -> TopologyOptions {
        TopologyOptions { n_core: self.catalog.n_core, allow_self_processing: self.catalog.allow_self_processing }
    }

    pub fn range_for(&self, architecture: Architecture) -> LoadRange {
        self.compare_load_ranges.get(&architecture).copied().unwrap_or(self.load_range)
    }

    /// The scenario at one per-task load.
    pub fn scenario(&self, load: f64) -> Result<Scenario, ConfigError> {
        if !(load.is_finite() && load > 0.0) {
            return Err(ConfigError::NonPositiveLoad(load));
        }
        let scenario = crate::catalog::make_scenario(load, &self.device_catalog()?, self.layout)?;
        let violations = validate_scenario(&scenario);
        if !violations.is_empty() {
            return Err(ConfigError::InvalidScenario(violations));
        }
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.device_catalog()?;
        self.load_range.points()?;
        for range in self.compare_load_ranges.values() {
            range.points()?;
        }
        if self.solver.time_seconds.is_nan() || self.solver.time_seconds <= 0.0 {
            return Err(ConfigError::Solver { name: "time_seconds", value: self.solver.time_seconds });
        }
        if !(self.solver.tolerance.is_finite() && self.solver.tolerance > 0.0) {
            return Err(ConfigError::Solver { name: "tolerance", value: self.solver.tolerance });
        }
        self.scenario(self.load_range.min)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::from_json(text, Path::new("test.json"))
    }

    #[test]
    fn empty_object_is_the_canonical_scenario() {
        let c = parse("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.device_catalog().unwrap(), default_catalog());
        assert_eq!(c.load_range.points().unwrap().len(), 15);
        assert_eq!(c.topology_options(), TopologyOptions::default());
    }

    #[test]
    fn ranges() {
        let r = LoadRange { min: 6.0, max: 20.0, step: 2.0 };
        assert_eq!(r.points().unwrap(), vec![6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0]);
        assert_eq!(LoadRange { min: 0.1, max: 0.3, step: 0.1 }.points().unwrap().len(), 3);
        assert_eq!(LoadRange { min: 5.0, max: 5.0, step: 1.0 }.points().unwrap(), vec![5.0]);
        for bad in [(0.0, 5.0, 1.0), (1.0, 5.0, 0.0), (5.0, 1.0, 1.0), (1.0, 1e9, 1e-3)] {
            assert!(LoadRange { min: bad.0, max: bad.1, step: bad.2 }.points().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse(r#"{"rooms": 4}"#), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse(r#"{"catalog": {"idle": 0.5}}"#), Err(ConfigError::Parse { .. })));
        assert!(matches!(parse(r#"{"catalog": {"network": {"onu": {"watts": 1}}}}"#), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn overrides_are_applied_and_checked() {
        let c = parse(
            r#"{"catalog": {"idle_fraction_processing": 0.5, "n_core": 3,
                "processing": {"room_fog": {"capacity": 80, "p_max": 100}},
                "network": {"onu": {"p_idle": 1}}}}"#,
        )
        .unwrap();
        let cat = c.device_catalog().unwrap();
        let rf = cat.processing(Tier::RoomFog);
        assert_eq!((rf.capacity, rf.p_max, rf.p_idle), (80.0, 100.0, 50.0));
        assert_eq!(cat.processing(Tier::Cloud).p_idle, 0.5 * cat.processing(Tier::Cloud).p_max);
        assert_eq!(cat.network(DeviceKind::Onu).p_idle, 1.0);
        assert_eq!(c.topology_options().n_core, 3);

        assert!(matches!(parse(r#"{"catalog": {"idle_fraction_processing": 1.5}}"#), Err(ConfigError::Catalog(_))));
        assert!(matches!(parse(r#"{"catalog": {"network": {"onu": {"p_idle": 100}}}}"#), Err(ConfigError::Catalog(_))));
        assert!(matches!(parse(r#"{"catalog": {"capacity_margin": 1}}"#), Err(ConfigError::Catalog(_))));
        assert!(matches!(
            parse(r#"{"layout": {"rooms": 4, "users_per_room": 2, "demanding_per_room": 3}}"#),
            Err(ConfigError::Scenario(_))
        ));
        assert!(matches!(
            parse(r#"{"load_range": {"min": 0, "max": 3, "step": 1}}"#),
            Err(ConfigError::LoadRange { .. })
        ));
        assert!(matches!(parse(r#"{"solver": {"time_seconds": 0}}"#), Err(ConfigError::Solver { .. })));
    }

    #[test]
    fn non_positive_load() {
        assert!(matches!(RunConfig::default().scenario(0.0), Err(ConfigError::NonPositiveLoad(_))));
        // 60 GFLOPs at 0.05 Gbps/GFLOP exceeds the 2.5 Gbps access link
        assert!(matches!(RunConfig::default().scenario(60.0), Err(ConfigError::InvalidScenario(_))));
    }

    #[test]
    fn json_round_trip() {
        let mut c = RunConfig::default();
        c.catalog.processing.insert(Tier::Cloud, ProcessingOverride { capacity: Some(500.0), ..Default::default() });
        c.compare_load_ranges.insert(Architecture::SpineLeaf, LoadRange { min: 6.0, max: 10.0, step: 2.0 });
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert!(text.contains("idle_fraction_processing") && text.contains("n_core"));
        assert_eq!(parse(&text).unwrap(), c);
    }
}
