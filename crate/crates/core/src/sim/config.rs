//! Declarative scenario description and its validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::script::{Action, Expect, ScriptStep};
use super::vehicle::Airframe;
use crate::dtn::{check_routes, NodeKind, Priority, ResendPolicy, RoutingTable, Routes, DEFAULT_DATUM_KIND};
use crate::fragproto::{max_datum_len, DEFAULT_FRAME_BYTES};
use crate::linkmodel::{builtin_profiles, RadioProfile};
use crate::orbit::OrbitEphemeris;
use crate::{Millis, NodeId};

pub const DEFAULT_TICK_MS: Millis = 100;
pub const DEFAULT_HOUSEKEEPING_MS: Millis = 1_000;
pub const DEFAULT_HOP_LATENCY_MS: Millis = 50;
/// Eviction age when no ephemeris gives a period to scale from.
pub const FALLBACK_EVICTION_AGE_MS: Millis = 600_000;

/// Invalid configuration, located by a dotted field path.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_tick() -> Millis {
    DEFAULT_TICK_MS
}
fn default_housekeeping() -> Millis {
    DEFAULT_HOUSEKEEPING_MS
}
fn default_hop_latency() -> Millis {
    DEFAULT_HOP_LATENCY_MS
}
fn default_kinds() -> Vec<String> {
    vec![DEFAULT_DATUM_KIND.to_string()]
}
pub(crate) fn default_kind() -> String {
    DEFAULT_DATUM_KIND.to_string()
}
fn default_queue_capacity() -> usize {
    1_000_000
}
fn default_telemetry_size() -> usize {
    TELEMETRY_LEN
}

/// Length of an encoded position/velocity report.
pub const TELEMETRY_LEN: usize = 45;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub seed: u64,
    pub duration_ms: Millis,
    /// SatComms polling period.
    #[serde(default = "default_tick")]
    pub tick_ms: Millis,
    /// Period of eviction sweeps over reassembly buffers and relay stores.
    #[serde(default = "default_housekeeping")]
    pub housekeeping_ms: Millis,
    /// Latency of wired links that do not set their own.
    #[serde(default = "default_hop_latency")]
    pub hop_latency_ms: Millis,
    /// Age after which incomplete reassembly buffers and stored relay
    /// frames are dropped. Defaults to two of the longest orbital period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eviction_age_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_bytes: Option<usize>,
    /// Name of the slot scheduler shared by vehicles tracking the same
    /// satellite; unscheduled when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_scheduler: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub radio_profiles: BTreeMap<String, RadioProfile>,
    #[serde(default)]
    pub airframe: Airframe,
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub ephemerides: Vec<OrbitEphemeris>,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub traffic: Vec<TrafficConfig>,
    #[serde(default)]
    pub script: Vec<ScriptStep>,
}

/// A radio profile by builtin/declared name, or written out in place.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum ProfileRef {
    Named(String),
    Inline(RadioProfile),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub kind: NodeKind,
    #[serde(default = "yes")]
    pub active: bool,
    /// Local tangent-plane position in metres.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio_profile: Option<ProfileRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub satcomms: Option<SatCommsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSpec>,
    #[serde(default)]
    pub routes: Vec<RouteSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub dest: NodeId,
    pub next_hop: NodeId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SatCommsSpec {
    #[serde(default = "yes")]
    pub transmit_when_possible: bool,
    #[serde(default = "default_kinds")]
    pub accepted_kinds: Vec<String>,
    /// Satellite (ephemeris id) to track; may be set later by a script.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ephemeris: Option<NodeId>,
    #[serde(default = "yes")]
    pub gate_on_visibility: bool,
    pub destination: NodeId,
    #[serde(default = "default_queue_capacity")]
    pub queue_capacity_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resend: Option<ResendPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MotionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
    #[serde(default)]
    pub waypoints: Vec<[f64; 3]>,
    #[serde(default)]
    pub airborne: bool,
    #[serde(default)]
    pub executing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery_j: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    /// Over-the-air; vehicle transmissions pay frame airtime.
    Radio,
    Wired,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct LinkChange {
    pub at_ms: Millis,
    pub up: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub id: String,
    pub a: NodeId,
    pub b: NodeId,
    pub medium: Medium,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<Millis>,
    /// Overrides the sending radio's loss probability.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_copy_loss: Option<f64>,
    #[serde(default = "yes")]
    pub up: bool,
    /// Only usable while this satellite's ephemeris is visible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<LinkChange>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Content {
    /// Encoded position and velocity of the producing vehicle.
    #[default]
    Telemetry,
    /// Deterministic byte pattern of the requested size.
    Pattern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub node: NodeId,
    #[serde(default = "default_kind")]
    pub kind: String,
    #[serde(default)]
    pub content: Content,
    #[serde(default = "default_telemetry_size")]
    pub size_bytes: usize,
    #[serde(default)]
    pub start_ms: Millis,
    pub period_ms: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_ms: Option<Millis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u32>,
    #[serde(default)]
    pub priority: Priority,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        // serde_json reports positions, not field paths
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| ConfigError::new(format!("line {} column {}", e.line(), e.column()), e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn frame_bytes(&self) -> usize {
        self.frame_bytes.unwrap_or(DEFAULT_FRAME_BYTES)
    }

    pub fn eviction_age(&self) -> Millis {
        self.eviction_age_ms.unwrap_or_else(|| {
            self.ephemerides
                .iter()
                .map(|e| 2 * e.period)
                .max()
                .unwrap_or(FALLBACK_EVICTION_AGE_MS)
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeConfig> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn node_mut(&mut self, id: NodeId) -> Option<&mut NodeConfig> {
        self.nodes.iter_mut().find(|n| n.id == id)
    }

    pub fn link_mut(&mut self, id: &str) -> Option<&mut LinkConfig> {
        self.links.iter_mut().find(|l| l.id == id)
    }

    pub fn resolve_profile(&self, r: &ProfileRef) -> Option<RadioProfile> {
        match r {
            ProfileRef::Inline(p) => Some(p.clone()),
            ProfileRef::Named(name) => self
                .radio_profiles
                .get(name)
                .cloned()
                .or_else(|| builtin_profiles().get(name).cloned()),
        }
    }

    pub fn routes(&self) -> Routes {
        self.nodes
            .iter()
            .map(|n| {
                let mut t = RoutingTable::default();
                for r in &n.routes {
                    t.set(r.dest, r.next_hop, r.link.clone());
                }
                (n.id, t)
            })
            .collect()
    }

    /// Checks every cross-reference and invariant.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_ms <= 0 {
            return Err(ConfigError::new("duration_ms", "must be positive"));
        }
        if self.tick_ms <= 0 {
            return Err(ConfigError::new("tick_ms", "must be positive"));
        }
        if self.housekeeping_ms <= 0 {
            return Err(ConfigError::new("housekeeping_ms", "must be positive"));
        }
        if self.hop_latency_ms < 0 {
            return Err(ConfigError::new("hop_latency_ms", "must not be negative"));
        }
        if let Some(age) = self.eviction_age_ms {
            if age <= 0 {
                return Err(ConfigError::new("eviction_age_ms", "must be positive"));
            }
        }
        let frame_bytes = self.frame_bytes();
        max_datum_len(frame_bytes).map_err(|e| ConfigError::new("frame_bytes", e))?;
        if let Some(s) = &self.uplink_scheduler {
            if crate::dtn::SchedulerRegistry::with_builtins().get(s).is_none() {
                return Err(ConfigError::new("uplink_scheduler", format!("unknown scheduler {s:?}")));
            }
        }
        for (name, p) in &self.radio_profiles {
            p.validate()
                .map_err(|e| ConfigError::new(format!("radio_profiles.{name}"), e))?;
        }
        self.airframe.validate().map_err(|m| ConfigError::new("airframe", m))?;

        let mut ids = BTreeSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if !ids.insert(n.id) {
                return Err(ConfigError::new(format!("nodes[{i}].id"), format!("duplicate node id {}", n.id.0)));
            }
        }
        let known = |id: NodeId| ids.contains(&id);

        let mut eph_ids = BTreeSet::new();
        for (i, e) in self.ephemerides.iter().enumerate() {
            let path = format!("ephemerides[{i}]");
            e.validate().map_err(|err| ConfigError::new(&path, err))?;
            if !known(e.satellite_id) {
                return Err(ConfigError::new(format!("{path}.satellite_id"), "unknown node"));
            }
            if !eph_ids.insert(e.satellite_id) {
                return Err(ConfigError::new(format!("{path}.satellite_id"), "duplicate ephemeris"));
            }
        }

        let mut link_ids = BTreeSet::new();
        for (i, l) in self.links.iter().enumerate() {
            let path = format!("links[{i}]");
            if !link_ids.insert(l.id.as_str()) {
                return Err(ConfigError::new(format!("{path}.id"), format!("duplicate link id {:?}", l.id)));
            }
            if !known(l.a) {
                return Err(ConfigError::new(format!("{path}.a"), "unknown node"));
            }
            if !known(l.b) {
                return Err(ConfigError::new(format!("{path}.b"), "unknown node"));
            }
            if l.a == l.b {
                return Err(ConfigError::new(&path, "link endpoints must differ"));
            }
            if l.latency_ms.is_some_and(|x| x < 0) {
                return Err(ConfigError::new(format!("{path}.latency_ms"), "must not be negative"));
            }
            if let Some(p) = l.per_copy_loss {
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::new(format!("{path}.per_copy_loss"), "must lie in [0, 1]"));
                }
            }
            if let Some(g) = l.gate {
                if !eph_ids.contains(&g) {
                    return Err(ConfigError::new(format!("{path}.gate"), "no ephemeris for this satellite"));
                }
            }
            for (j, c) in l.schedule.iter().enumerate() {
                if c.at_ms < 0 {
                    return Err(ConfigError::new(format!("{path}.schedule[{j}].at_ms"), "must not be negative"));
                }
            }
        }
        let link_ids: BTreeSet<String> = link_ids.into_iter().map(str::to_string).collect();
        let link_joins = |id: &str, x: NodeId, y: NodeId| {
            self.links
                .iter()
                .any(|l| l.id == id && ((l.a, l.b) == (x, y) || (l.b, l.a) == (x, y)))
        };

        for (i, n) in self.nodes.iter().enumerate() {
            let path = format!("nodes[{i}]");
            if let Some(r) = &n.radio_profile {
                let p = self
                    .resolve_profile(r)
                    .ok_or_else(|| ConfigError::new(format!("{path}.radio_profile"), "unknown profile"))?;
                p.validate()
                    .map_err(|e| ConfigError::new(format!("{path}.radio_profile"), e))?;
                if p.frame_bytes as usize != frame_bytes && n.satcomms.is_some() {
                    return Err(ConfigError::new(
                        format!("{path}.radio_profile"),
                        format!("frame size {} differs from scenario frame size {frame_bytes}", p.frame_bytes),
                    ));
                }
            }
            for (j, r) in n.routes.iter().enumerate() {
                let rp = format!("{path}.routes[{j}]");
                if !known(r.dest) {
                    return Err(ConfigError::new(format!("{rp}.dest"), "unknown node"));
                }
                if !known(r.next_hop) {
                    return Err(ConfigError::new(format!("{rp}.next_hop"), "unknown node"));
                }
                if let Some(l) = &r.link {
                    if !link_joins(l, n.id, r.next_hop) {
                        return Err(ConfigError::new(format!("{rp}.link"), "link does not join node and next hop"));
                    }
                }
            }
            if let Some(sc) = &n.satcomms {
                let sp = format!("{path}.satcomms");
                if n.kind != NodeKind::Vehicle {
                    return Err(ConfigError::new(&sp, "only vehicles run SatComms"));
                }
                if n.radio_profile.is_none() {
                    return Err(ConfigError::new(format!("{path}.radio_profile"), "required with satcomms"));
                }
                if !known(sc.destination) {
                    return Err(ConfigError::new(format!("{sp}.destination"), "unknown node"));
                }
                if let Some(e) = sc.ephemeris {
                    if !eph_ids.contains(&e) {
                        return Err(ConfigError::new(format!("{sp}.ephemeris"), "unknown ephemeris"));
                    }
                }
                if let Some(rs) = &sc.resend {
                    if rs.after_ms <= 0 {
                        return Err(ConfigError::new(format!("{sp}.resend.after_ms"), "must be positive"));
                    }
                }
            }
            if let Some(m) = &n.motion {
                let mp = format!("{path}.motion");
                if n.kind != NodeKind::Vehicle {
                    return Err(ConfigError::new(&mp, "only vehicles move"));
                }
                if let Some(s) = m.speed_mps {
                    self.airframe
                        .check_speed(s)
                        .map_err(|e| ConfigError::new(format!("{mp}.speed_mps"), e))?;
                }
                if n.position.is_none() {
                    return Err(ConfigError::new(format!("{path}.position"), "required with motion"));
                }
                for (j, w) in m.waypoints.iter().chain(n.position.iter()).enumerate() {
                    self.airframe
                        .check_altitude(w[2])
                        .map_err(|e| ConfigError::new(format!("{mp}.waypoints[{j}]"), e))?;
                }
            }
        }
        check_routes(&self.routes()).map_err(|e| ConfigError::new("nodes[].routes", e))?;

        for (i, t) in self.traffic.iter().enumerate() {
            let path = format!("traffic[{i}]");
            let n = self
                .node(t.node)
                .ok_or_else(|| ConfigError::new(format!("{path}.node"), "unknown node"))?;
            if n.satcomms.is_none() {
                return Err(ConfigError::new(format!("{path}.node"), "node has no satcomms"));
            }
            if t.period_ms <= 0 {
                return Err(ConfigError::new(format!("{path}.period_ms"), "must be positive"));
            }
            if t.content == Content::Telemetry && n.motion.is_none() && n.position.is_none() {
                return Err(ConfigError::new(format!("{path}.content"), "telemetry needs a node position"));
            }
        }

        let ctx = ValidationContext {
            cfg: self,
            link_ids: &link_ids,
            eph_ids: &eph_ids,
        };
        for (i, s) in self.script.iter().enumerate() {
            let path = format!("script[{i}]");
            if s.at_ms < 0 {
                return Err(ConfigError::new(format!("{path}.at_ms"), "must not be negative"));
            }
            if s.check_at_ms.is_some_and(|c| c < s.at_ms) {
                return Err(ConfigError::new(format!("{path}.check_at_ms"), "must not precede at_ms"));
            }
            for (j, a) in s.actions.iter().enumerate() {
                ctx.action(a, &format!("{path}.actions[{j}]"))?;
            }
            for (j, a) in s.retry.iter().enumerate() {
                ctx.action(a, &format!("{path}.retry[{j}]"))?;
            }
            ctx.expect(&s.expect, &format!("{path}.expect"))?;
        }
        Ok(())
    }
}

struct ValidationContext<'a> {
    cfg: &'a ScenarioConfig,
    link_ids: &'a BTreeSet<String>,
    eph_ids: &'a BTreeSet<NodeId>,
}

impl ValidationContext<'_> {
    fn node(&self, id: NodeId, path: &str) -> Result<&NodeConfig, ConfigError> {
        self.cfg
            .node(id)
            .ok_or_else(|| ConfigError::new(path, format!("unknown node {}", id.0)))
    }

    fn vehicle(&self, id: NodeId, path: &str, need_motion: bool) -> Result<(), ConfigError> {
        let n = self.node(id, path)?;
        if n.kind != NodeKind::Vehicle {
            return Err(ConfigError::new(path, "not a vehicle"));
        }
        if need_motion && n.motion.is_none() {
            return Err(ConfigError::new(path, "vehicle has no motion"));
        }
        Ok(())
    }

    fn satcomms(&self, id: NodeId, path: &str) -> Result<(), ConfigError> {
        if self.node(id, path)?.satcomms.is_none() {
            return Err(ConfigError::new(path, "node has no satcomms"));
        }
        Ok(())
    }

    fn link(&self, id: &str, path: &str) -> Result<(), ConfigError> {
        if !self.link_ids.contains(id) {
            return Err(ConfigError::new(path, format!("unknown link {id:?}")));
        }
        Ok(())
    }

    fn action(&self, a: &Action, path: &str) -> Result<(), ConfigError> {
        match a {
            Action::SetLink { link, .. } => self.link(link, &format!("{path}.link")),
            Action::SetRoute { node, dest, next_hop, link } => {
                self.node(*node, &format!("{path}.node"))?;
                self.node(*dest, &format!("{path}.dest"))?;
                self.node(*next_hop, &format!("{path}.next_hop"))?;
                if let Some(l) = link {
                    self.link(l, &format!("{path}.link"))?;
                }
                Ok(())
            }
            Action::RemoveRoute { node, dest } => {
                self.node(*node, &format!("{path}.node"))?;
                self.node(*dest, &format!("{path}.dest")).map(|_| ())
            }
            Action::PowerUp { node } | Action::PowerDown { node } => {
                self.node(*node, &format!("{path}.node")).map(|_| ())
            }
            Action::Takeoff { node } | Action::Land { node } | Action::StartPlan { node } => {
                self.vehicle(*node, &format!("{path}.node"), true)
            }
            Action::UploadPlan { node, waypoints } => {
                self.vehicle(*node, &format!("{path}.node"), true)?;
                if waypoints.is_empty() {
                    return Err(ConfigError::new(format!("{path}.waypoints"), "survey plan has no waypoints"));
                }
                for (j, w) in waypoints.iter().enumerate() {
                    self.cfg
                        .airframe
                        .check_altitude(w[2])
                        .map_err(|e| ConfigError::new(format!("{path}.waypoints[{j}]"), e))?;
                }
                Ok(())
            }
            Action::ConfigureSatellite { node, ephemeris } => {
                self.satcomms(*node, &format!("{path}.node"))?;
                if !self.eph_ids.contains(ephemeris) {
                    return Err(ConfigError::new(format!("{path}.ephemeris"), "unknown ephemeris"));
                }
                Ok(())
            }
            Action::SetTransmit { node, .. } => self.satcomms(*node, &format!("{path}.node")),
            Action::Enqueue { node, .. } => self.satcomms(*node, &format!("{path}.node")),
        }
    }

    fn expect(&self, e: &Expect, path: &str) -> Result<(), ConfigError> {
        let node = |id: NodeId, field: &str| self.node(id, &format!("{path}.{field}")).map(|_| ());
        match e {
            Expect::Always | Expect::SlotsDisjoint => Ok(()),
            Expect::LinkUp { link } => self.link(link, &format!("{path}.link")),
            Expect::RouteConfigured { node: n, dest } | Expect::PathReachable { from: n, dest } => {
                node(*n, "node")?;
                node(*dest, "dest")
            }
            Expect::NodeActive { node: n }
            | Expect::Received { node: n, .. }
            | Expect::DeliveredFrom { node: n, .. } => node(*n, "node"),
            Expect::SatCommsArmed { node: n, .. } | Expect::Transmitting { node: n, .. } => {
                self.satcomms(*n, &format!("{path}.node"))
            }
            Expect::LoiterTransmitting { node: n } => {
                self.satcomms(*n, &format!("{path}.node"))?;
                self.vehicle(*n, &format!("{path}.node"), true)
            }
            Expect::Airborne { node: n, .. }
            | Expect::PlanLoaded { node: n }
            | Expect::PlanExecuting { node: n }
            | Expect::Landed { node: n } => self.vehicle(*n, &format!("{path}.node"), true),
            Expect::DatumDelivered { .. } => Ok(()),
            Expect::InRange { a, b, .. } => {
                for (id, f) in [(a, "a"), (b, "b")] {
                    let n = self.node(*id, &format!("{path}.{f}"))?;
                    if n.position.is_none() {
                        return Err(ConfigError::new(format!("{path}.{f}"), "node has no position"));
                    }
                }
                Ok(())
            }
            Expect::PassRawBytes { satellite, .. } => {
                if !self.eph_ids.contains(satellite) {
                    return Err(ConfigError::new(format!("{path}.satellite"), "unknown ephemeris"));
                }
                Ok(())
            }
            Expect::RedundancyAccounting { sender, receiver } => {
                self.satcomms(*sender, &format!("{path}.sender"))?;
                node(*receiver, "receiver")
            }
            Expect::All { checks } => {
                for (i, c) in checks.iter().enumerate() {
                    self.expect(c, &format!("{path}.checks[{i}]"))?;
                }
                Ok(())
            }
        }
    }
}
