//! Device parameters and scenario construction.
//!
//! Every numeric parameter of the model lives here. Processing nodes and
//! network devices both follow an idle-plus-proportional power curve, so each
//! entry carries a capacity, a maximum power and an idle power.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Processing tier of a host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    UserDevice,
    RoomFog,
    BuildingFog,
    CampusFog,
    MetroFog,
    Cloud,
}

impl Tier {
    pub const ALL: [Tier; 6] =
        [Tier::UserDevice, Tier::RoomFog, Tier::BuildingFog, Tier::CampusFog, Tier::MetroFog, Tier::Cloud];

    /// Short label used in exported tables (`UD`, `RF`, `BF`, `CF`, `MF`, `CC`).
    pub fn label(self) -> &'static str {
        match self {
            Tier::UserDevice => "UD",
            Tier::RoomFog => "RF",
            Tier::BuildingFog => "BF",
            Tier::CampusFog => "CF",
            Tier::MetroFog => "MF",
            Tier::Cloud => "CC",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Kind of network element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    AccessPoint,
    Onu,
    Olt,
    EthernetSwitch,
    AggregationSwitch,
    EdgeRouter,
    OpticalSwitch,
    CoreRouter,
    LeafSwitch,
    SpineSwitch,
    GatewayRouter,
    /// Splitters, couplers and AWGRs. Never draws power.
    Passive,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 12] = [
        DeviceKind::AccessPoint,
        DeviceKind::Onu,
        DeviceKind::Olt,
        DeviceKind::EthernetSwitch,
        DeviceKind::AggregationSwitch,
        DeviceKind::EdgeRouter,
        DeviceKind::OpticalSwitch,
        DeviceKind::CoreRouter,
        DeviceKind::LeafSwitch,
        DeviceKind::SpineSwitch,
        DeviceKind::GatewayRouter,
        DeviceKind::Passive,
    ];

    pub fn is_passive(self) -> bool {
        self == DeviceKind::Passive
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DeviceKind::AccessPoint => "AP",
            DeviceKind::Onu => "ONU",
            DeviceKind::Olt => "OLT",
            DeviceKind::EthernetSwitch => "EthernetSwitch",
            DeviceKind::AggregationSwitch => "AggregationSwitch",
            DeviceKind::EdgeRouter => "EdgeRouter",
            DeviceKind::OpticalSwitch => "OpticalSwitch",
            DeviceKind::CoreRouter => "CoreRouter",
            DeviceKind::LeafSwitch => "LeafSwitch",
            DeviceKind::SpineSwitch => "SpineSwitch",
            DeviceKind::GatewayRouter => "GatewayRouter",
            DeviceKind::Passive => "Passive",
        };
        f.write_str(s)
    }
}

/// Capacity and power figures of one processing tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingSpec {
    pub name: String,
    pub tier: Tier,
    /// GFLOPS, used as a static pool against GFLOPs demands.
    pub capacity: f64,
    pub p_max: f64,
    pub p_idle: f64,
}

/// Capacity and power figures of one network device kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDeviceSpec {
    pub name: String,
    pub kind: DeviceKind,
    /// Gbps. Zero for passive elements.
    pub capacity: f64,
    pub p_max: f64,
    pub p_idle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceCatalog {
    pub processing: BTreeMap<Tier, ProcessingSpec>,
    pub network: BTreeMap<DeviceKind, NetworkDeviceSpec>,
    pub idle_fraction_processing: f64,
    /// Gbps carried by one PON wavelength channel instance.
    pub wavelength_capacity: f64,
    /// Gbps each VLC access point offers its user.
    pub per_user_ap_rate: f64,
    /// Data rate ratio, Gbps of traffic per GFLOPs of processing.
    pub drr: f64,
    /// Effective processing capacity is `(1 - capacity_margin) * capacity`.
    pub capacity_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("{what} must satisfy 0 <= p_idle ({p_idle}) <= p_max ({p_max})")]
    IdleAboveMax { what: String, p_idle: f64, p_max: f64 },
    #[error("{what} must have a positive finite capacity, got {capacity}")]
    NonPositiveCapacity { what: String, capacity: f64 },
    #[error("passive element must draw no power")]
    PoweredPassive,
    #[error("{name} = {value} is out of range ({range})")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
    #[error("catalog has no entry for {0}")]
    Missing(String),
}

impl ProcessingSpec {
    fn new(name: &str, tier: Tier, capacity: f64, p_max: f64, idle_fraction: f64) -> Self {
        Self { name: name.to_string(), tier, capacity, p_max, p_idle: idle_fraction * p_max }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let what = format!("processing spec {}", self.tier);
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(CatalogError::NonPositiveCapacity { what, capacity: self.capacity });
        }
        check_power(what, self.p_idle, self.p_max)
    }
}

impl NetworkDeviceSpec {
    fn new(name: &str, kind: DeviceKind, p_max: f64, p_idle: f64, capacity: f64) -> Self {
        Self { name: name.to_string(), kind, capacity, p_max, p_idle }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let what = format!("network spec {}", self.kind);
        if self.kind.is_passive() {
            if self.p_max != 0.0 || self.p_idle != 0.0 {
                return Err(CatalogError::PoweredPassive);
            }
            return Ok(());
        }
        if !(self.capacity.is_finite() && self.capacity > 0.0) {
            return Err(CatalogError::NonPositiveCapacity { what, capacity: self.capacity });
        }
        check_power(what, self.p_idle, self.p_max)
    }
}

fn check_power(what: String, p_idle: f64, p_max: f64) -> Result<(), CatalogError> {
    if p_idle.is_finite() && p_max.is_finite() && 0.0 <= p_idle && p_idle <= p_max {
        Ok(())
    } else {
        Err(CatalogError::IdleAboveMax { what, p_idle, p_max })
    }
}

/// Processing idle power as a fraction of maximum power, when not overridden.
pub const DEFAULT_IDLE_FRACTION: f64 = 0.6;

/// The reference catalog: processing and network device tables, DRR 0.05,
/// 2.5 Gbps per VLC user and 10 Gbps wavelength channels.
pub fn default_catalog() -> DeviceCatalog {
    let f = DEFAULT_IDLE_FRACTION;
    let processing = [
        ProcessingSpec::new("ARM Cortex A53", Tier::UserDevice, 12.888, 18.0, f),
        ProcessingSpec::new("Core i3-6006U", Tier::RoomFog, 64.0, 65.0, f),
        ProcessingSpec::new("Intel Xeon E3-1220 v2", Tier::BuildingFog, 99.0, 305.0, f),
        ProcessingSpec::new("Intel Xeon E5-2440 v2", Tier::CampusFog, 121.6, 350.0, f),
        ProcessingSpec::new("Intel Xeon E5-4650 v3", Tier::MetroFog, 403.2, 750.0, f),
        ProcessingSpec::new("Intel Xeon Platinum 8280", Tier::Cloud, 1612.8, 1100.0, f),
    ]
    .into_iter()
    .map(|s| (s.tier, s))
    .collect();

    let network = [
        NetworkDeviceSpec::new("Access point", DeviceKind::AccessPoint, 7.2, 4.32, 2.5),
        NetworkDeviceSpec::new("ONU", DeviceKind::Onu, 15.0, 9.0, 10.0),
        NetworkDeviceSpec::new("OLT line card", DeviceKind::Olt, 300.0, 180.0, 160.0),
        NetworkDeviceSpec::new("Ethernet switch", DeviceKind::EthernetSwitch, 435.0, 261.0, 240.0),
        NetworkDeviceSpec::new("Aggregation switch", DeviceKind::AggregationSwitch, 435.0, 261.0, 240.0),
        NetworkDeviceSpec::new("Edge router", DeviceKind::EdgeRouter, 750.0, 450.0, 480.0),
        NetworkDeviceSpec::new("Optical switch", DeviceKind::OpticalSwitch, 63.2, 37.92, 100.0),
        NetworkDeviceSpec::new("Core router", DeviceKind::CoreRouter, 344.0, 206.4, 3200.0),
        NetworkDeviceSpec::new("Leaf switch", DeviceKind::LeafSwitch, 508.0, 304.8, 480.0),
        NetworkDeviceSpec::new("Spine switch", DeviceKind::SpineSwitch, 660.0, 360.0, 1440.0),
        NetworkDeviceSpec::new("Gateway router", DeviceKind::GatewayRouter, 344.0, 206.4, 3200.0),
        NetworkDeviceSpec::new("Passive optics", DeviceKind::Passive, 0.0, 0.0, 0.0),
    ]
    .into_iter()
    .map(|s| (s.kind, s))
    .collect();

    DeviceCatalog {
        processing,
        network,
        idle_fraction_processing: f,
        wavelength_capacity: 10.0,
        per_user_ap_rate: 2.5,
        drr: 0.05,
        capacity_margin: 0.0,
    }
}

impl Default for DeviceCatalog {
    fn default() -> Self {
        default_catalog()
    }
}

impl DeviceCatalog {
    pub fn processing(&self, tier: Tier) -> &ProcessingSpec {
        &self.processing[&tier]
    }

    pub fn network(&self, kind: DeviceKind) -> &NetworkDeviceSpec {
        &self.network[&kind]
    }

    /// Capacity a host of `tier` can actually take after the margin.
    pub fn effective_capacity(&self, tier: Tier) -> f64 {
        (1.0 - self.capacity_margin) * self.processing(tier).capacity
    }

    /// Sets the processing idle fraction and recomputes every processing idle power.
    pub fn set_idle_fraction(&mut self, fraction: f64) {
        self.idle_fraction_processing = fraction;
        for spec in self.processing.values_mut() {
            spec.p_idle = fraction * spec.p_max;
        }
    }

    /// Multiplies every maximum and idle power by `k`.
    pub fn scale_power(&mut self, k: f64) {
        for spec in self.processing.values_mut() {
            spec.p_max *= k;
            spec.p_idle *= k;
        }
        for spec in self.network.values_mut() {
            spec.p_max *= k;
            spec.p_idle *= k;
        }
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        for tier in Tier::ALL {
            self.processing.get(&tier).ok_or_else(|| CatalogError::Missing(tier.to_string()))?.validate()?;
        }
        for kind in DeviceKind::ALL {
            self.network.get(&kind).ok_or_else(|| CatalogError::Missing(kind.to_string()))?.validate()?;
        }
        range("idle_fraction_processing", self.idle_fraction_processing, 0.0..=1.0, "[0, 1]")?;
        range("capacity_margin", self.capacity_margin, 0.0..=1.0, "[0, 1)")?;
        if self.capacity_margin >= 1.0 {
            return Err(CatalogError::OutOfRange {
                name: "capacity_margin",
                value: self.capacity_margin,
                range: "[0, 1)",
            });
        }
        positive("drr", self.drr)?;
        positive("per_user_ap_rate", self.per_user_ap_rate)?;
        positive("wavelength_capacity", self.wavelength_capacity)?;
        Ok(())
    }
}

fn range(
    name: &'static str,
    value: f64,
    r: std::ops::RangeInclusive<f64>,
    label: &'static str,
) -> Result<(), CatalogError> {
    if r.contains(&value) {
        Ok(())
    } else {
        Err(CatalogError::OutOfRange { name, value, range: label })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), CatalogError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(CatalogError::OutOfRange { name, value, range: "(0, inf)" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DemandId(pub usize);

impl fmt::Display for DemandId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// A user slot, zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UserRef {
    pub room: usize,
    pub user: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: DemandId,
    pub source: UserRef,
    /// GFLOPs.
    pub load: f64,
    /// Gbps.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    pub rooms: usize,
    pub users_per_room: usize,
    pub demanding_per_room: usize,
}

impl Default for Layout {
    fn default() -> Self {
        Self { rooms: 4, users_per_room: 8, demanding_per_room: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub layout: Layout,
    pub demands: Vec<Demand>,
    pub catalog: DeviceCatalog,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("per-task load must be positive and finite, got {0}")]
    NonPositiveLoad(f64),
    #[error("{demanding} demanding users per room exceeds {users} users per room")]
    TooManyDemanding { demanding: usize, users: usize },
    #[error("expected {expected} loads, got {got}")]
    LoadCount { expected: usize, got: usize },
    #[error("layout needs at least one room and one user per room")]
    EmptyLayout,
}

fn check_layout(layout: Layout) -> Result<(), ScenarioError> {
    if layout.rooms == 0 || layout.users_per_room == 0 {
        return Err(ScenarioError::EmptyLayout);
    }
    if layout.demanding_per_room > layout.users_per_room {
        return Err(ScenarioError::TooManyDemanding {
            demanding: layout.demanding_per_room,
            users: layout.users_per_room,
        });
    }
    Ok(())
}

/// Builds the uniform scenario: every demanding user issues one task of
/// `per_task_load` GFLOPs. Demanding users occupy the first slots of each room.
pub fn make_scenario(per_task_load: f64, catalog: &DeviceCatalog, layout: Layout) -> Result<Scenario, ScenarioError> {
    check_layout(layout)?;
    let n = layout.rooms * layout.demanding_per_room;
    Scenario::with_loads(layout, &vec![per_task_load; n], catalog)
}

impl Scenario {
    /// Like [`make_scenario`] but with one load per demand, in room-major order.
    pub fn with_loads(layout: Layout, loads: &[f64], catalog: &DeviceCatalog) -> Result<Scenario, ScenarioError> {
        check_layout(layout)?;
        let expected = layout.rooms * layout.demanding_per_room;
        if loads.len() != expected {
            return Err(ScenarioError::LoadCount { expected, got: loads.len() });
        }
        if let Some(&bad) = loads.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(ScenarioError::NonPositiveLoad(bad));
        }
        let mut demands = Vec::with_capacity(expected);
        for room in 0..layout.rooms {
            for user in 0..layout.demanding_per_room {
                let id = DemandId(demands.len());
                let load = loads[id.0];
                demands.push(Demand { id, source: UserRef { room, user }, load, rate: catalog.drr * load });
            }
        }
        Ok(Scenario { layout, demands, catalog: catalog.clone() })
    }

    pub fn total_load(&self) -> f64 {
        self.demands.iter().map(|d| d.load).sum()
    }

    pub fn is_demanding(&self, user: UserRef) -> bool {
        self.demands.iter().any(|d| d.source == user)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    ApRateExceeded { demand: DemandId, rate: f64, limit: f64 },
    DuplicateSource { user: UserRef },
    SourceOutOfRange { demand: DemandId },
    TooManyDemanding,
    DemandCountMismatch { expected: usize, got: usize },
    NonPositiveLoad { demand: DemandId },
    InvalidCatalog(String),
}

/// Returns one record per breached scenario invariant; empty when the
/// scenario is usable.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let l = s.layout;
    if let Err(e) = s.catalog.validate() {
        out.push(Violation::InvalidCatalog(e.to_string()));
    }
    if l.demanding_per_room > l.users_per_room {
        out.push(Violation::TooManyDemanding);
    }
    let expected = l.rooms * l.demanding_per_room;
    if s.demands.len() != expected {
        out.push(Violation::DemandCountMismatch { expected, got: s.demands.len() });
    }
    let mut seen = BTreeSet::new();
    for d in &s.demands {
        if d.source.room >= l.rooms || d.source.user >= l.users_per_room {
            out.push(Violation::SourceOutOfRange { demand: d.id });
        }
        if !seen.insert(d.source) {
            out.push(Violation::DuplicateSource { user: d.source });
        }
        if !(d.load.is_finite() && d.load > 0.0) {
            out.push(Violation::NonPositiveLoad { demand: d.id });
        }
        if d.rate > s.catalog.per_user_ap_rate {
            out.push(Violation::ApRateExceeded { demand: d.id, rate: d.rate, limit: s.catalog.per_user_ap_rate });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_processing_table() {
        let c = default_catalog();
        let ud = c.processing(Tier::UserDevice);
        assert_eq!((ud.capacity, ud.p_max), (12.888, 18.0));
        let rf = c.processing(Tier::RoomFog);
        assert_eq!((rf.capacity, rf.p_max), (64.0, 65.0));
        let cc = c.processing(Tier::Cloud);
        assert_eq!((cc.capacity, cc.p_max), (1612.8, 1100.0));
        assert_eq!(c.processing(Tier::BuildingFog).capacity, 99.0);
        assert_eq!(c.processing(Tier::CampusFog).p_max, 350.0);
        assert_eq!(c.processing(Tier::MetroFog).capacity, 403.2);
        assert!((rf.p_idle - 39.0).abs() < 1e-12);
    }

    #[test]
    fn default_network_table() {
        let c = default_catalog();
        let ap = c.network(DeviceKind::AccessPoint);
        assert_eq!((ap.capacity, ap.p_max, ap.p_idle), (2.5, 7.2, 4.32));
        let spine = c.network(DeviceKind::SpineSwitch);
        assert_eq!((spine.capacity, spine.p_max, spine.p_idle), (1440.0, 660.0, 360.0));
        let core = c.network(DeviceKind::CoreRouter);
        let gw = c.network(DeviceKind::GatewayRouter);
        assert_eq!((core.capacity, core.p_max, core.p_idle), (gw.capacity, gw.p_max, gw.p_idle));
        assert_eq!((c.drr, c.per_user_ap_rate, c.wavelength_capacity, c.capacity_margin), (0.05, 2.5, 10.0, 0.0));
    }

    #[test]
    fn printed_idle_column_is_sixty_percent_except_spine() {
        let c = default_catalog();
        for spec in c.network.values() {
            if spec.kind.is_passive() {
                continue;
            }
            let ratio = spec.p_idle / spec.p_max;
            if spec.kind == DeviceKind::SpineSwitch {
                // printed 360 W idle against 660 W max
                assert!((ratio - 360.0 / 660.0).abs() < 1e-12);
            } else {
                assert!((ratio - 0.6).abs() <= 1e-9 * 0.6, "{}: {ratio}", spec.kind);
            }
        }
    }

    #[test]
    fn catalog_is_referentially_transparent() {
        assert_eq!(default_catalog(), default_catalog());
        default_catalog().validate().unwrap();
    }

    #[test]
    fn scenario_rates_follow_drr() {
        let c = default_catalog();
        let s = make_scenario(6.0, &c, Layout::default()).unwrap();
        assert_eq!(s.demands.len(), 8);
        assert!(s.demands.iter().all(|d| (d.rate - 0.3).abs() < 1e-12));
        let s = make_scenario(20.0, &c, Layout::default()).unwrap();
        assert!(s.demands.iter().all(|d| d.rate == 1.0));
        let s = make_scenario(10.0, &c, Layout { rooms: 1, users_per_room: 2, demanding_per_room: 1 }).unwrap();
        assert_eq!(s.demands.len(), 1);
        assert_eq!((s.demands[0].load, s.demands[0].rate), (10.0, 0.5));
        assert!(validate_scenario(&s).is_empty());
    }

    #[test]
    fn demanding_users_take_first_slots() {
        let s = make_scenario(6.0, &default_catalog(), Layout::default()).unwrap();
        let users: Vec<_> = s.demands.iter().map(|d| (d.source.room, d.source.user)).collect();
        assert_eq!(users[..4], [(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn make_scenario_rejects_bad_inputs() {
        let c = default_catalog();
        let bad = Layout { rooms: 4, users_per_room: 2, demanding_per_room: 3 };
        assert!(matches!(make_scenario(6.0, &c, bad), Err(ScenarioError::TooManyDemanding { .. })));
        assert!(matches!(make_scenario(0.0, &c, Layout::default()), Err(ScenarioError::NonPositiveLoad(_))));
    }

    #[test]
    fn validation_reports_breaches() {
        let c = default_catalog();
        let mut s = make_scenario(20.0, &c, Layout::default()).unwrap();
        assert!(validate_scenario(&s).is_empty());
        s.demands[3].rate = 3.0;
        assert_eq!(
            validate_scenario(&s),
            vec![Violation::ApRateExceeded { demand: DemandId(3), rate: 3.0, limit: 2.5 }]
        );
        s.demands[3].rate = 1.0;
        s.demands[1].source = s.demands[0].source;
        assert!(matches!(validate_scenario(&s)[..], [Violation::DuplicateSource { .. }]));
    }

    #[test]
    fn idle_fraction_and_scaling() {
        let mut c = default_catalog();
        c.set_idle_fraction(0.5);
        assert_eq!(c.processing(Tier::RoomFog).p_idle, 32.5);
        c.scale_power(2.0);
        assert_eq!(c.processing(Tier::RoomFog).p_max, 130.0);
        assert_eq!(c.network(DeviceKind::Onu).p_idle, 18.0);
        c.capacity_margin = 1.0;
        assert!(c.validate().is_err());
    }
}
