//! Device graphs for the PON and spine-and-leaf building fabrics plus the
//! shared metro/core chain above them.
//!
//! Both fabrics give every (user, host) pair a single route, so paths are
//! precomputed and flow conservation and wavelength continuity hold by
//! construction.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    validate_scenario, Demand, DeviceCatalog, DeviceKind, Layout, NetworkDeviceSpec, ProcessingSpec, Scenario, Tier,
    UserRef, Violation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Architecture {
    #[serde(rename = "pon")]
    PonBased,
    #[serde(rename = "spine_leaf")]
    SpineLeaf,
    #[serde(rename = "cloud_only")]
    CloudOnly,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::PonBased, Architecture::SpineLeaf, Architecture::CloudOnly];

    pub fn slug(self) -> &'static str {
        match self {
            Architecture::PonBased => "pon",
            Architecture::SpineLeaf => "spine_leaf",
            Architecture::CloudOnly => "cloud_only",
        }
    }

    pub fn fabric(self) -> Fabric {
        match self {
            Architecture::SpineLeaf => Fabric::SpineLeaf,
            Architecture::PonBased | Architecture::CloudOnly => Fabric::Pon,
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pon" | "pon_based" => Ok(Architecture::PonBased),
            "sl" | "spine_leaf" => Ok(Architecture::SpineLeaf),
            "cloud" | "cloud_only" => Ok(Architecture::CloudOnly),
            other => Err(format!("unknown architecture `{other}` (pon, spine_leaf, cloud_only)")),
        }
    }
}

/// Physical building network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fabric {
    Pon,
    SpineLeaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DeviceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HostId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    Room(usize),
    Building,
    Campus,
    Metro,
    Core,
    Datacenter,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Room(r) => write!(f, "room{}", r + 1),
            Location::Building => f.write_str("building"),
            Location::Campus => f.write_str("campus"),
            Location::Metro => f.write_str("metro"),
            Location::Core => f.write_str("core"),
            Location::Datacenter => f.write_str("datacenter"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceInstance {
    pub id: DeviceId,
    pub name: String,
    pub kind: DeviceKind,
    pub location: Location,
    pub neighbors: Vec<DeviceId>,
}

/// Where a host plugs into the fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attachment {
    User(UserRef),
    RoomFog(usize),
    Building,
    Campus,
    Metro,
    Cloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HostInstance {
    pub id: HostId,
    /// Display name, e.g. `r1RF`, `r2UD5`, `BF`.
    pub name: String,
    pub tier: Tier,
    pub location: Location,
    pub attachment: Attachment,
    /// Devices from the host up to its aggregation point.
    pub attach_stub: Vec<DeviceId>,
    /// Demanding users can only host when self-processing is enabled.
    pub demanding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelLabel {
    /// Within one room.
    Intra,
    /// Room to OLT.
    Olt,
    /// Room `i` to room `(i + offset) % rooms` through the AWGR.
    Inter(usize),
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelLabel::Intra => f.write_str("λ_intra"),
            ChannelLabel::Olt => f.write_str("λ_olt"),
            ChannelLabel::Inter(k) if *k <= 26 => {
                write!(f, "λ_{}", char::from(b'a' + (*k - 1) as u8))
            }
            ChannelLabel::Inter(k) => write!(f, "λ_{k}"),
        }
    }
}

/// One wavelength as used by one room; the capacity pool the room's ONUs
/// share by TDM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Channel {
    pub label: ChannelLabel,
    pub source_room: usize,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@room{}", self.label, self.source_room + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanTarget {
    Room(usize),
    Olt,
}

/// Cyclic AWGR wavelength plan. With four rooms this uses exactly five
/// wavelengths: one intra-room, one to the OLT and three inter-room.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthPlan {
    pub rooms: usize,
    pub channel_capacity: f64,
}

impl WavelengthPlan {
    pub fn label(&self, source_room: usize, target: PlanTarget) -> ChannelLabel {
        match target {
            PlanTarget::Olt => ChannelLabel::Olt,
            PlanTarget::Room(r) if r == source_room => ChannelLabel::Intra,
            PlanTarget::Room(r) => ChannelLabel::Inter((r + self.rooms - source_room) % self.rooms),
        }
    }

    /// Every label the plan can hand out.
    pub fn labels(&self) -> BTreeSet<ChannelLabel> {
        let mut out: BTreeSet<_> = (1..self.rooms).map(ChannelLabel::Inter).collect();
        out.insert(ChannelLabel::Intra);
        out.insert(ChannelLabel::Olt);
        out
    }

    pub fn destination(&self, source_room: usize, label: ChannelLabel) -> PlanTarget {
        match label {
            ChannelLabel::Intra => PlanTarget::Room(source_room),
            ChannelLabel::Olt => PlanTarget::Olt,
            ChannelLabel::Inter(k) => PlanTarget::Room((source_room + k) % self.rooms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub device: DeviceId,
    /// Fraction of the flow crossing this device; 0.5 on each spine.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub hops: Vec<Hop>,
    pub channel: Option<Channel>,
}

impl Path {
    pub fn devices(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.hops.iter().map(|h| h.device)
    }

    pub fn contains(&self, device: DeviceId) -> bool {
        self.devices().any(|d| d == device)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyOptions {
    /// Optical switch + core router pairs between the metro edge and the datacenter.
    pub n_core: usize,
    pub allow_self_processing: bool,
}

impl Default for TopologyOptions {
    fn default() -> Self {
        Self { n_core: 1, allow_self_processing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("scenario is invalid: {0:?}")]
    InvalidScenario(Vec<Violation>),
    #[error("host {0:?} is not a candidate host of this topology")]
    UnknownHost(HostId),
    #[error("wavelength plans only exist for PON fabrics")]
    NotApplicable,
    #[error("upstream chain already built")]
    UpstreamPresent,
}

#[derive(Debug, Clone, PartialEq)]
struct Upstream {
    campus_switch: DeviceId,
    aggregation: DeviceId,
    edge_router: DeviceId,
    core: Vec<(DeviceId, DeviceId)>,
    dc_switch: DeviceId,
}

#[derive(Debug, Clone, PartialEq)]
enum Building {
    Pon {
        user_onu: Vec<DeviceId>,
        fog_onu: Vec<DeviceId>,
        splitter: Vec<DeviceId>,
        coupler: Vec<DeviceId>,
        /// `[room-to-room, room-to-OLT]`
        awgr: [DeviceId; 2],
        olt: DeviceId,
    },
    SpineLeaf {
        leaf: Vec<DeviceId>,
        spine: [DeviceId; 2],
        gateway: DeviceId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub fabric: Fabric,
    pub layout: Layout,
    pub catalog: DeviceCatalog,
    pub devices: Vec<DeviceInstance>,
    /// Every processing node in canonical order. See [`hosts`] for the
    /// candidate set of an architecture.
    pub all_hosts: Vec<HostInstance>,
    pub allow_self_processing: bool,
    user_ap: Vec<DeviceId>,
    building: Building,
    upstream: Option<Upstream>,
}

struct Builder {
    devices: Vec<DeviceInstance>,
}

impl Builder {
    fn add(&mut self, name: String, kind: DeviceKind, location: Location) -> DeviceId {
        let id = DeviceId(self.devices.len());
        self.devices.push(DeviceInstance { id, name, kind, location, neighbors: Vec::new() });
        id
    }

    fn link(&mut self, a: DeviceId, b: DeviceId) {
        self.devices[a.0].neighbors.push(b);
        self.devices[b.0].neighbors.push(a);
    }
}

fn check(scenario: &Scenario) -> Result<(), TopologyError> {
    let v = validate_scenario(scenario);
    if v.is_empty() {
        Ok(())
    } else {
        Err(TopologyError::InvalidScenario(v))
    }
}

/// Room hosts in canonical order: the room's user devices by slot, then its fog.
fn room_hosts(scenario: &Scenario, room: usize, stub_for: impl Fn(Attachment) -> Vec<DeviceId>) -> Vec<HostInstance> {
    let mut out = Vec::new();
    for user in 0..scenario.layout.users_per_room {
        let u = UserRef { room, user };
        let attachment = Attachment::User(u);
        out.push(HostInstance {
            id: HostId(0),
            name: format!("r{}UD{}", room + 1, user + 1),
            tier: Tier::UserDevice,
            location: Location::Room(room),
            attachment,
            attach_stub: stub_for(attachment),
            demanding: scenario.is_demanding(u),
        });
    }
    let attachment = Attachment::RoomFog(room);
    out.push(HostInstance {
        id: HostId(0),
        name: format!("r{}RF", room + 1),
        tier: Tier::RoomFog,
        location: Location::Room(room),
        attachment,
        attach_stub: stub_for(attachment),
        demanding: false,
    });
    out
}

fn renumber(hosts: &mut [HostInstance]) {
    for (i, h) in hosts.iter_mut().enumerate() {
        h.id = HostId(i);
    }
}

/// Builds the PON building: per room one AP + ONU per user, a dedicated ONU
/// for the room fog, a splitter and a coupler; two AWGRs and one OLT with the
/// building fog attached.
pub fn build_pon(scenario: &Scenario) -> Result<Topology, TopologyError> {
    check(scenario)?;
    let l = scenario.layout;
    let mut b = Builder { devices: Vec::new() };
    let awgr = [
        b.add("awgr-rooms".into(), DeviceKind::Passive, Location::Building),
        b.add("awgr-olt".into(), DeviceKind::Passive, Location::Building),
    ];
    let olt = b.add("olt".into(), DeviceKind::Olt, Location::Building);
    b.link(awgr[1], olt);
    let mut user_ap = Vec::new();
    let mut user_onu = Vec::new();
    let mut fog_onu = Vec::new();
    let mut splitter = Vec::new();
    let mut coupler = Vec::new();
    for room in 0..l.rooms {
        let loc = Location::Room(room);
        let sp = b.add(format!("r{}-splitter", room + 1), DeviceKind::Passive, loc);
        let cp = b.add(format!("r{}-coupler", room + 1), DeviceKind::Passive, loc);
        for a in awgr {
            b.link(sp, a);
            b.link(cp, a);
        }
        for user in 0..l.users_per_room {
            let ap = b.add(format!("r{}-ap{}", room + 1, user + 1), DeviceKind::AccessPoint, loc);
            let onu = b.add(format!("r{}-onu{}", room + 1, user + 1), DeviceKind::Onu, loc);
            b.link(ap, onu);
            b.link(onu, sp);
            b.link(onu, cp);
            user_ap.push(ap);
            user_onu.push(onu);
        }
        let fo = b.add(format!("r{}-onu-rf", room + 1), DeviceKind::Onu, loc);
        b.link(fo, sp);
        b.link(fo, cp);
        fog_onu.push(fo);
        splitter.push(sp);
        coupler.push(cp);
    }

    let upr = l.users_per_room;
    let stub = |a: Attachment| match a {
        Attachment::User(u) => vec![user_ap[u.room * upr + u.user], user_onu[u.room * upr + u.user]],
        Attachment::RoomFog(r) => vec![fog_onu[r]],
        _ => vec![olt],
    };
    let mut hosts = Vec::new();
    for room in 0..l.rooms {
        hosts.extend(room_hosts(scenario, room, stub));
    }
    hosts.push(building_fog(vec![olt]));
    renumber(&mut hosts);

    Ok(Topology {
        fabric: Fabric::Pon,
        layout: l,
        catalog: scenario.catalog.clone(),
        devices: b.devices,
        all_hosts: hosts,
        allow_self_processing: false,
        user_ap,
        building: Building::Pon { user_onu, fog_onu, splitter, coupler, awgr, olt },
        upstream: None,
    })
}

fn building_fog(stub: Vec<DeviceId>) -> HostInstance {
    HostInstance {
        id: HostId(0),
        name: "BF".into(),
        tier: Tier::BuildingFog,
        location: Location::Building,
        attachment: Attachment::Building,
        attach_stub: stub,
        demanding: false,
    }
}

/// Builds the spine-and-leaf building: one leaf per room wiring its APs and
/// room fog, two spines over all leaves and a gateway router with the
/// building fog attached.
pub fn build_spine_leaf(scenario: &Scenario) -> Result<Topology, TopologyError> {
    check(scenario)?;
    let l = scenario.layout;
    let mut b = Builder { devices: Vec::new() };
    let spine = [
        b.add("spine1".into(), DeviceKind::SpineSwitch, Location::Building),
        b.add("spine2".into(), DeviceKind::SpineSwitch, Location::Building),
    ];
    let gateway = b.add("gateway".into(), DeviceKind::GatewayRouter, Location::Building);
    for s in spine {
        b.link(s, gateway);
    }
    let mut leaf = Vec::new();
    let mut user_ap = Vec::new();
    for room in 0..l.rooms {
        let loc = Location::Room(room);
        let lf = b.add(format!("r{}-leaf", room + 1), DeviceKind::LeafSwitch, loc);
        for s in spine {
            b.link(lf, s);
        }
        for user in 0..l.users_per_room {
            let ap = b.add(format!("r{}-ap{}", room + 1, user + 1), DeviceKind::AccessPoint, loc);
            b.link(ap, lf);
            user_ap.push(ap);
        }
        leaf.push(lf);
    }

    let upr = l.users_per_room;
    let stub = |a: Attachment| match a {
        Attachment::User(u) => vec![user_ap[u.room * upr + u.user], leaf[u.room]],
        Attachment::RoomFog(r) => vec![leaf[r]],
        _ => vec![gateway],
    };
    let mut hosts = Vec::new();
    for room in 0..l.rooms {
        hosts.extend(room_hosts(scenario, room, stub));
    }
    hosts.push(building_fog(vec![gateway]));
    renumber(&mut hosts);

    Ok(Topology {
        fabric: Fabric::SpineLeaf,
        layout: l,
        catalog: scenario.catalog.clone(),
        devices: b.devices,
        all_hosts: hosts,
        allow_self_processing: false,
        user_ap,
        building: Building::SpineLeaf { leaf, spine, gateway },
        upstream: None,
    })
}

/// Appends the chain above the building egress: campus Ethernet switch
/// (campus fog), aggregation switch, edge router (metro fog), `n_core`
/// optical switch + core router pairs and the datacenter switch (cloud).
pub fn build_upstream(mut topo: Topology, options: &TopologyOptions) -> Result<Topology, TopologyError> {
    if topo.upstream.is_some() {
        return Err(TopologyError::UpstreamPresent);
    }
    let egress = topo.egress();
    let mut b = Builder { devices: std::mem::take(&mut topo.devices) };
    let campus_switch = b.add("campus-switch".into(), DeviceKind::EthernetSwitch, Location::Campus);
    b.link(egress, campus_switch);
    let aggregation = b.add("aggregation".into(), DeviceKind::AggregationSwitch, Location::Metro);
    b.link(campus_switch, aggregation);
    let edge_router = b.add("edge-router".into(), DeviceKind::EdgeRouter, Location::Metro);
    b.link(aggregation, edge_router);
    let mut prev = edge_router;
    let mut core = Vec::new();
    for i in 0..options.n_core {
        let os = b.add(format!("core{}-optical", i + 1), DeviceKind::OpticalSwitch, Location::Core);
        let cr = b.add(format!("core{}-router", i + 1), DeviceKind::CoreRouter, Location::Core);
        b.link(prev, os);
        b.link(os, cr);
        prev = cr;
        core.push((os, cr));
    }
    let dc_switch = b.add("dc-switch".into(), DeviceKind::EthernetSwitch, Location::Datacenter);
    b.link(prev, dc_switch);
    topo.devices = b.devices;

    let campus_stub = vec![campus_switch, egress];
    let metro_stub = vec![edge_router, aggregation, campus_switch, egress];
    let mut cloud_stub: Vec<DeviceId> = vec![dc_switch];
    for &(os, cr) in core.iter().rev() {
        cloud_stub.extend([cr, os]);
    }
    cloud_stub.extend(&metro_stub);
    let upstream_hosts = [
        ("CF", Tier::CampusFog, Location::Campus, Attachment::Campus, campus_stub),
        ("MF", Tier::MetroFog, Location::Metro, Attachment::Metro, metro_stub),
        ("CC", Tier::Cloud, Location::Datacenter, Attachment::Cloud, cloud_stub),
    ];
    for (name, tier, location, attachment, attach_stub) in upstream_hosts {
        topo.all_hosts.push(HostInstance {
            id: HostId(topo.all_hosts.len()),
            name: name.into(),
            tier,
            location,
            attachment,
            attach_stub,
            demanding: false,
        });
    }
    topo.upstream = Some(Upstream { campus_switch, aggregation, edge_router, core, dc_switch });
    topo.allow_self_processing = options.allow_self_processing;
    Ok(topo)
}

impl Topology {
    /// Full topology (building fabric plus upstream chain) for an architecture.
    pub fn build(
        architecture: Architecture,
        scenario: &Scenario,
        options: &TopologyOptions,
    ) -> Result<Topology, TopologyError> {
        let building = match architecture.fabric() {
            Fabric::Pon => build_pon(scenario)?,
            Fabric::SpineLeaf => build_spine_leaf(scenario)?,
        };
        build_upstream(building, options)
    }

    pub fn device(&self, id: DeviceId) -> &DeviceInstance {
        &self.devices[id.0]
    }

    pub fn device_spec(&self, id: DeviceId) -> &NetworkDeviceSpec {
        self.catalog.network(self.devices[id.0].kind)
    }

    pub fn host(&self, id: HostId) -> &HostInstance {
        &self.all_hosts[id.0]
    }

    pub fn host_spec(&self, id: HostId) -> &ProcessingSpec {
        self.catalog.processing(self.all_hosts[id.0].tier)
    }

    pub fn host_by_name(&self, name: &str) -> Option<HostId> {
        self.all_hosts.iter().find(|h| h.name == name).map(|h| h.id)
    }

    pub fn device_by_name(&self, name: &str) -> Option<DeviceId> {
        self.devices.iter().find(|d| d.name == name).map(|d| d.id)
    }

    pub fn devices_of_kind(&self, kind: DeviceKind) -> impl Iterator<Item = &DeviceInstance> + '_ {
        self.devices.iter().filter(move |d| d.kind == kind)
    }

    pub fn user_ap(&self, user: UserRef) -> DeviceId {
        self.user_ap[user.room * self.layout.users_per_room + user.user]
    }

    /// OLT for PON, gateway router for spine-and-leaf.
    pub fn egress(&self) -> DeviceId {
        match &self.building {
            Building::Pon { olt, .. } => *olt,
            Building::SpineLeaf { gateway, .. } => *gateway,
        }
    }

    fn is_candidate(&self, host: &HostInstance, architecture: Architecture) -> bool {
        if architecture == Architecture::CloudOnly {
            return host.tier == Tier::Cloud;
        }
        !host.demanding || self.allow_self_processing
    }

    /// Users reach their own AP first, then climb to the fabric.
    fn source_prefix(&self, user: UserRef) -> Vec<Hop> {
        let ap = self.user_ap(user);
        let mut hops = vec![full(ap)];
        match &self.building {
            Building::Pon { user_onu, splitter, .. } => {
                let i = user.room * self.layout.users_per_room + user.user;
                hops.push(full(user_onu[i]));
                hops.push(full(splitter[user.room]));
            }
            Building::SpineLeaf { leaf, .. } => hops.push(full(leaf[user.room])),
        }
        hops
    }
}

fn full(device: DeviceId) -> Hop {
    Hop { device, share: 1.0 }
}

/// Candidate hosts of `architecture` in canonical order.
pub fn hosts(topology: &Topology, architecture: Architecture) -> Vec<&HostInstance> {
    topology.all_hosts.iter().filter(|h| topology.is_candidate(h, architecture)).collect()
}

/// The unique route from the demand's AP to `host`.
pub fn path_for(topology: &Topology, demand: &Demand, host: HostId) -> Result<Path, TopologyError> {
    let h = topology.all_hosts.get(host.0).ok_or(TopologyError::UnknownHost(host))?;
    if h.demanding && !topology.allow_self_processing {
        return Err(TopologyError::UnknownHost(host));
    }
    if matches!(h.attachment, Attachment::Campus | Attachment::Metro | Attachment::Cloud) && topology.upstream.is_none()
    {
        return Err(TopologyError::UnknownHost(host));
    }
    let src = demand.source;
    if h.attachment == Attachment::User(src) {
        // processed on the user's own device
        return Ok(Path { hops: Vec::new(), channel: None });
    }

    let mut hops = topology.source_prefix(src);
    let stub_hops = || h.attach_stub.iter().rev().map(|&d| full(d));
    let target_room = match h.attachment {
        Attachment::User(u) => Some(u.room),
        Attachment::RoomFog(r) => Some(r),
        _ => None,
    };
    let channel = match &topology.building {
        Building::Pon { coupler, awgr, .. } => {
            let plan = WavelengthPlan { rooms: topology.layout.rooms, channel_capacity: 0.0 };
            match target_room {
                Some(r) => {
                    hops.push(full(awgr[0]));
                    hops.push(full(coupler[r]));
                    hops.extend(stub_hops());
                    Channel { label: plan.label(src.room, PlanTarget::Room(r)), source_room: src.room }
                }
                None => {
                    hops.push(full(awgr[1]));
                    hops.extend(stub_hops());
                    Channel { label: ChannelLabel::Olt, source_room: src.room }
                }
            }
            .into()
        }
        Building::SpineLeaf { spine, .. } => {
            if target_room == Some(src.room) {
                // the source leaf is already on the path
                hops.extend(stub_hops().skip(1));
            } else {
                hops.extend(spine.iter().map(|&device| Hop { device, share: 0.5 }));
                hops.extend(stub_hops());
            }
            None
        }
    };
    Ok(Path { hops, channel })
}

pub fn wavelength_plan(topology: &Topology) -> Result<WavelengthPlan, TopologyError> {
    match topology.fabric {
        Fabric::Pon => {
            Ok(WavelengthPlan { rooms: topology.layout.rooms, channel_capacity: topology.catalog.wavelength_capacity })
        }
        Fabric::SpineLeaf => Err(TopologyError::NotApplicable),
    }
}

/// Plain-text adjacency listing, one line per device:
/// `<id>\t<name>\t<kind>\t<location>\t<neighbor names, comma separated>`.
pub fn dump_adjacency(topology: &Topology) -> String {
    let mut out = String::new();
    for d in &topology.devices {
        let neighbors: Vec<&str> = d.neighbors.iter().map(|n| topology.devices[n.0].name.as_str()).collect();
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", d.id.0, d.name, d.kind, d.location, neighbors.join(","));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, make_scenario};

    fn canonical() -> Scenario {
        make_scenario(6.0, &default_catalog(), Layout::default()).unwrap()
    }

    fn count(t: &Topology, kind: DeviceKind) -> usize {
        t.devices_of_kind(kind).count()
    }

    fn kinds(t: &Topology, p: &Path) -> Vec<DeviceKind> {
        p.devices().map(|d| t.device(d).kind).filter(|k| !k.is_passive()).collect()
    }

    fn powered(t: &Topology, p: &Path) -> Vec<String> {
        p.devices().filter(|&d| !t.device(d).kind.is_passive()).map(|d| t.device(d).name.clone()).collect()
    }

    fn demand_in(s: &Scenario, room: usize) -> &Demand {
        s.demands.iter().find(|d| d.source.room == room).unwrap()
    }

    #[test]
    fn pon_census() {
        let t = build_pon(&canonical()).unwrap();
        assert_eq!(count(&t, DeviceKind::AccessPoint), 32);
        assert_eq!(count(&t, DeviceKind::Onu), 36);
        assert_eq!(count(&t, DeviceKind::Olt), 1);
        assert_eq!(count(&t, DeviceKind::Passive), 10);
    }

    #[test]
    fn canonical_host_census() {
        let s = canonical();
        for arch in [Architecture::PonBased, Architecture::SpineLeaf] {
            let t = Topology::build(arch, &s, &TopologyOptions::default()).unwrap();
            let hs = hosts(&t, arch);
            assert_eq!(hs.len(), 32);
            assert_eq!(hs.iter().filter(|h| h.tier == Tier::UserDevice).count(), 24);
            assert_eq!(hs.iter().filter(|h| h.tier == Tier::RoomFog).count(), 4);
            assert!(hs.iter().all(|h| !h.demanding));
        }
        let t = Topology::build(Architecture::CloudOnly, &s, &TopologyOptions::default()).unwrap();
        let hs = hosts(&t, Architecture::CloudOnly);
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].tier, Tier::Cloud);
    }

    #[test]
    fn minimal_instance() {
        let s = make_scenario(10.0, &default_catalog(), Layout { rooms: 1, users_per_room: 2, demanding_per_room: 1 })
            .unwrap();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        assert_eq!(count(&t, DeviceKind::AccessPoint), 2);
        assert_eq!(count(&t, DeviceKind::Onu), 3);
        let names: Vec<_> = hosts(&t, Architecture::PonBased).iter().map(|h| h.name.clone()).collect();
        assert_eq!(names, ["r1UD2", "r1RF", "BF", "CF", "MF", "CC"]);
    }

    #[test]
    fn spine_leaf_census_and_paths() {
        let s = canonical();
        let t = Topology::build(Architecture::SpineLeaf, &s, &TopologyOptions::default()).unwrap();
        assert_eq!(count(&t, DeviceKind::AccessPoint), 32);
        assert_eq!(count(&t, DeviceKind::LeafSwitch), 4);
        assert_eq!(count(&t, DeviceKind::SpineSwitch), 2);
        assert_eq!(count(&t, DeviceKind::GatewayRouter), 1);
        assert_eq!(count(&t, DeviceKind::Onu), 0);
        assert_eq!(wavelength_plan(&t), Err(TopologyError::NotApplicable));

        let d = &s.demands[0];
        let rf = t.host_by_name("r1RF").unwrap();
        let p = path_for(&t, d, rf).unwrap();
        assert_eq!(powered(&t, &p), ["r1-ap1", "r1-leaf"]);
        assert_eq!(p.channel, None);

        let ud = t.host_by_name("r3UD4").unwrap();
        let p = path_for(&t, d, ud).unwrap();
        assert_eq!(powered(&t, &p), ["r1-ap1", "r1-leaf", "spine1", "spine2", "r3-leaf", "r3-ap4"]);
        let shares: Vec<f64> = p.hops.iter().map(|h| h.share).collect();
        assert_eq!(shares, [1.0, 1.0, 0.5, 0.5, 1.0, 1.0]);

        let same_room = path_for(&t, d, t.host_by_name("r1UD5").unwrap()).unwrap();
        assert_eq!(powered(&t, &same_room), ["r1-ap1", "r1-leaf", "r1-ap5"]);

        let bf = path_for(&t, d, t.host_by_name("BF").unwrap()).unwrap();
        assert_eq!(powered(&t, &bf), ["r1-ap1", "r1-leaf", "spine1", "spine2", "gateway"]);
        let other_rf = path_for(&t, d, t.host_by_name("r2RF").unwrap()).unwrap();
        assert_eq!(powered(&t, &other_rf), ["r1-ap1", "r1-leaf", "spine1", "spine2", "r2-leaf"]);
    }

    #[test]
    fn pon_paths() {
        let s = canonical();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let d2 = demand_in(&s, 1);
        let p = path_for(&t, d2, t.host_by_name("r2RF").unwrap()).unwrap();
        assert_eq!(powered(&t, &p), ["r2-ap1", "r2-onu1", "r2-onu-rf"]);
        assert_eq!(p.channel, Some(Channel { label: ChannelLabel::Intra, source_room: 1 }));

        let d1 = demand_in(&s, 0);
        let p = path_for(&t, d1, t.host_by_name("r3UD5").unwrap()).unwrap();
        assert_eq!(powered(&t, &p), ["r1-ap1", "r1-onu1", "r3-onu5", "r3-ap5"]);
        assert_eq!(p.channel.unwrap().label, ChannelLabel::Inter(2));
        assert!(!p.contains(t.egress()));

        let p = path_for(&t, d1, t.host_by_name("BF").unwrap()).unwrap();
        assert_eq!(powered(&t, &p), ["r1-ap1", "r1-onu1", "olt"]);
        assert_eq!(p.channel.unwrap().label, ChannelLabel::Olt);
    }

    #[test]
    fn upstream_chain() {
        let s = canonical();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let d = &s.demands[0];
        let cc = path_for(&t, d, t.host_by_name("CC").unwrap()).unwrap();
        use DeviceKind::*;
        assert_eq!(
            kinds(&t, &cc),
            [
                AccessPoint,
                Onu,
                Olt,
                EthernetSwitch,
                AggregationSwitch,
                EdgeRouter,
                OpticalSwitch,
                CoreRouter,
                EthernetSwitch
            ]
        );
        let cf = path_for(&t, d, t.host_by_name("CF").unwrap()).unwrap();
        assert_eq!(t.device(cf.hops.last().unwrap().device).name, "campus-switch");
        let mf = path_for(&t, d, t.host_by_name("MF").unwrap()).unwrap();
        assert_eq!(t.device(mf.hops.last().unwrap().device).kind, EdgeRouter);

        let t3 =
            Topology::build(Architecture::PonBased, &s, &TopologyOptions { n_core: 3, ..Default::default() }).unwrap();
        let cc = path_for(&t3, d, t3.host_by_name("CC").unwrap()).unwrap();
        let k = kinds(&t3, &cc);
        assert_eq!(k.iter().filter(|&&x| x == OpticalSwitch).count(), 3);
        assert_eq!(k.iter().filter(|&&x| x == CoreRouter).count(), 3);

        let sl = Topology::build(Architecture::SpineLeaf, &s, &TopologyOptions::default()).unwrap();
        let cc = path_for(&sl, d, sl.host_by_name("CC").unwrap()).unwrap();
        assert_eq!(kinds(&sl, &cc)[..5], [AccessPoint, LeafSwitch, SpineSwitch, SpineSwitch, GatewayRouter]);
        assert!(matches!(build_upstream(t, &TopologyOptions::default()), Err(TopologyError::UpstreamPresent)));
    }

    #[test]
    fn unknown_hosts_rejected() {
        let s = canonical();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        let demanding = t.host_by_name("r1UD1").unwrap();
        assert_eq!(path_for(&t, &s.demands[0], demanding), Err(TopologyError::UnknownHost(demanding)));
        assert_eq!(path_for(&t, &s.demands[0], HostId(999)), Err(TopologyError::UnknownHost(HostId(999))));
        let bare = build_pon(&s).unwrap();
        assert!(path_for(&bare, &s.demands[0], HostId(bare.all_hosts.len() - 1)).is_ok());
    }

    #[test]
    fn self_processing_flag() {
        let s = canonical();
        let opts = TopologyOptions { allow_self_processing: true, ..Default::default() };
        let t = Topology::build(Architecture::PonBased, &s, &opts).unwrap();
        assert_eq!(hosts(&t, Architecture::PonBased).len(), 40);
        let own = t.host_by_name("r1UD1").unwrap();
        assert!(path_for(&t, &s.demands[0], own).unwrap().hops.is_empty());
        let p = path_for(&t, &s.demands[1], own).unwrap();
        assert_eq!(powered(&t, &p), ["r1-ap2", "r1-onu2", "r1-onu1", "r1-ap1"]);
    }

    #[test]
    fn canonical_wavelength_plan() {
        let t = build_pon(&canonical()).unwrap();
        let plan = wavelength_plan(&t).unwrap();
        assert_eq!(plan.labels().len(), 5);
        assert_eq!(plan.channel_capacity, 10.0);
        assert_eq!(plan.label(0, PlanTarget::Room(0)), ChannelLabel::Intra);
        assert_eq!(plan.label(2, PlanTarget::Olt), ChannelLabel::Olt);
        for src in 0..4 {
            let inter: BTreeSet<_> =
                (0..4).filter(|&r| r != src).map(|r| plan.label(src, PlanTarget::Room(r))).collect();
            assert_eq!(inter, [1, 2, 3].into_iter().map(ChannelLabel::Inter).collect());
            for label in plan.labels() {
                assert_eq!(plan.label(src, plan.destination(src, label)), label);
            }
        }
        // 12 ordered inter-room pairs split evenly across the three labels
        for k in 1..4 {
            let pairs = (0..4)
                .flat_map(|i| (0..4).map(move |j| (i, j)))
                .filter(|&(i, j)| i != j && plan.label(i, PlanTarget::Room(j)) == ChannelLabel::Inter(k))
                .count();
            assert_eq!(pairs, 4);
        }
        assert_eq!(ChannelLabel::Inter(1).to_string(), "λ_a");
    }

    #[test]
    fn olt_only_on_upstream_paths() {
        let s = canonical();
        let t = Topology::build(Architecture::PonBased, &s, &TopologyOptions::default()).unwrap();
        for d in &s.demands {
            for h in hosts(&t, Architecture::PonBased) {
                let p = path_for(&t, d, h.id).unwrap();
                let via_olt = p.contains(t.egress());
                let upstream = matches!(h.tier, Tier::BuildingFog | Tier::CampusFog | Tier::MetroFog | Tier::Cloud);
                assert_eq!(via_olt, upstream, "{}", h.name);
                assert_eq!(p.hops[0].device, t.user_ap(d.source));
                assert_eq!(p, path_for(&t, d, h.id).unwrap());
            }
        }
    }

    #[test]
    fn spine_only_between_rooms() {
        let s = canonical();
        let t = Topology::build(Architecture::SpineLeaf, &s, &TopologyOptions::default()).unwrap();
        for d in &s.demands {
            for h in hosts(&t, Architecture::SpineLeaf) {
                let p = path_for(&t, d, h.id).unwrap();
                let k = kinds(&t, &p);
                let leaves = k.iter().filter(|&&x| x == DeviceKind::LeafSwitch).count();
                let spines = k.iter().filter(|&&x| x == DeviceKind::SpineSwitch).count();
                match h.location {
                    Location::Room(r) if r == d.source.room => assert_eq!((leaves, spines), (1, 0)),
                    Location::Room(_) => assert_eq!((leaves, spines), (2, 2)),
                    _ => assert_eq!((leaves, spines), (1, 2)),
                }
            }
        }
    }

    #[test]
    fn room_relabeling_maps_paths_to_paths() {
        let s = canonical();
        let perm = [2usize, 0, 3, 1];
        for arch in [Architecture::PonBased, Architecture::SpineLeaf] {
            let t = Topology::build(arch, &s, &TopologyOptions::default()).unwrap();
            for d in &s.demands {
                let mut pd = d.clone();
                pd.source.room = perm[d.source.room];
                for h in hosts(&t, arch) {
                    let mapped = match h.location {
                        Location::Room(r) => h.name.replacen(&format!("r{}", r + 1), &format!("r{}", perm[r] + 1), 1),
                        _ => h.name.clone(),
                    };
                    let ph = t.host_by_name(&mapped).unwrap();
                    let a = path_for(&t, d, h.id).unwrap();
                    let b = path_for(&t, &pd, ph).unwrap();
                    assert_eq!(kinds(&t, &a), kinds(&t, &b));
                    let rename = |n: &str| {
                        (0..4)
                            .fold(n.to_string(), |acc, r| {
                                acc.replace(&format!("r{}-", r + 1), &format!("R{}-", perm[r] + 1))
                            })
                            .replace('R', "r")
                    };
                    let mapped_names: Vec<String> = powered(&t, &a).iter().map(|n| rename(n)).collect();
                    assert_eq!(mapped_names, powered(&t, &b));
                    assert_eq!(
                        a.channel.map(|c| c.label == ChannelLabel::Intra),
                        b.channel.map(|c| c.label == ChannelLabel::Intra)
                    );
                }
            }
        }
    }

    #[test]
    fn adjacency_dump_lists_every_device() {
        let t = build_pon(&canonical()).unwrap();
        let dump = dump_adjacency(&t);
        assert_eq!(dump.lines().count(), t.devices.len());
        let olt_line = dump.lines().find(|l| l.split('\t').nth(1) == Some("olt")).unwrap();
        assert!(olt_line.ends_with("awgr-rooms,awgr-olt") || olt_line.contains("awgr-olt"));
    }
}
