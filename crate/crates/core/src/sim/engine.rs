use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};

use super::config::{ConfigError, Content, Medium, ScenarioConfig, TELEMETRY_LEN};
use super::event::{DatumSource, EventKind, EventQueue, ScriptPhase};
use super::ledger::{DatumEntry, DatumLedger, DatumState, Settled};
use super::log::{
    ArrivalOutcome, ArrivalRecord, CopyRecord, EventLog, FinalStandby, LogDetail, LogRecord, NodeInfo, RunHeader,
    RunSummary, ScriptOutcome, SlotRecord, TransmitRecord, LOG_SCHEMA_VERSION,
};
use super::metrics::Metrics;
use super::rng::LossStream;
use super::script::{Action, Expect, Outcome, ScriptStep};
use super::vehicle::{distance, step_vehicle, VehicleState};
use crate::dtn::{
    check_routes, DatumId, DropReason, EnqueueError, LinkView, Node, NodeKind, Packet, PassTag, Priority,
    ReceiveEffect, SatComms, SatCommsConfig, SchedulerRegistry, SlotGate, StoreReason, Transmission, VehicleDemand,
};
use crate::fragproto::{decode_frame, IngestOutcome};
use crate::linkmodel::energy_of;
use crate::orbit::{OrbitEphemeris, PassWindow};
use crate::{Millis, NodeId};

/// Battery assumed for vehicles that do not state one (4 Ah at 18.5 V).
pub const DEFAULT_BATTERY_J: f64 = 266_400.0;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<LogRecord>,
    pub metrics: Metrics,
}

impl RunOutput {
    pub fn to_jsonl(&self) -> String {
        super::log::to_jsonl(&self.records)
    }

    pub fn assertions_passed(&self) -> bool {
        self.metrics.all_assertions_passed()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ConfigError),
    #[error("event log sink failed after {} records: {source}", partial.records.len())]
    Sink {
        #[source]
        source: io::Error,
        /// Everything logged up to the failure.
        partial: Box<RunOutput>,
    },
}

/// Runs a scenario to completion and returns its log and metrics.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput, SimError> {
    run_inner(config, None)
}

/// Like [`run`] but streams each record to `sink` as it is produced.
pub fn run_with_sink(config: &ScenarioConfig, sink: &mut dyn Write) -> Result<RunOutput, SimError> {
    run_inner(config, Some(sink))
}

fn run_inner<'a>(config: &'a ScenarioConfig, sink: Option<&'a mut dyn Write>) -> Result<RunOutput, SimError> {
    config.validate()?;
    let mut sim = Sim::new(config, sink);
    sim.start();
    while let Some(t) = sim.events.peek_time() {
        if t > config.duration_ms || sim.log.failure.is_some() {
            break;
        }
        let ev = sim.events.pop().expect("peeked");
        debug_assert!(ev.time >= sim.now, "event scheduled in the past");
        sim.now = ev.time;
        sim.processed += 1;
        sim.dispatch(ev.target, ev.kind);
    }
    if sim.log.failure.is_none() {
        sim.finish();
        sim.log.flush();
    }
    let failure = sim.log.failure.take();
    let out = RunOutput {
        records: std::mem::take(&mut sim.log.records),
        metrics: std::mem::take(&mut sim.metrics),
    };
    match failure {
        Some(source) => Err(SimError::Sink {
            source,
            partial: Box::new(out),
        }),
        None => Ok(out),
    }
}

struct LinkRt {
    id: String,
    a: NodeId,
    b: NodeId,
    medium: Medium,
    per_copy_loss: Option<f64>,
    latency: Millis,
    gate: Option<NodeId>,
    up: bool,
    loss: LossStream,
}

impl LinkRt {
    fn joins(&self, x: NodeId, y: NodeId) -> bool {
        (self.a, self.b) == (x, y) || (self.b, self.a) == (x, y)
    }
}

struct LinksNow<'b> {
    links: &'b [LinkRt],
    eph: &'b BTreeMap<NodeId, OrbitEphemeris>,
    now: Millis,
}

impl LinksNow<'_> {
    fn open(&self, i: usize) -> bool {
        let l = &self.links[i];
        l.up && l
            .gate
            .is_none_or(|g| self.eph.get(&g).is_some_and(|e| e.is_visible(self.now)))
    }
}

impl LinkView for LinksNow<'_> {
    fn usable_link(&self, from: NodeId, to: NodeId, pinned: Option<&str>) -> Option<usize> {
        (0..self.links.len()).find(|&i| {
            let l = &self.links[i];
            l.joins(from, to) && pinned.is_none_or(|p| p == l.id) && self.open(i)
        })
    }
}

struct VehicleRt {
    state: VehicleState,
    plan: Vec<[f64; 3]>,
    landed: bool,
    flagged: bool,
    last_update: Millis,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    now: Millis,
    events: EventQueue,
    nodes: Vec<Node>,
    index: BTreeMap<NodeId, usize>,
    positions: BTreeMap<NodeId, [f64; 3]>,
    vehicles: BTreeMap<NodeId, VehicleRt>,
    links: Vec<LinkRt>,
    eph: BTreeMap<NodeId, OrbitEphemeris>,
    schedulers: SchedulerRegistry,
    ledger: DatumLedger,
    metrics: Metrics,
    log: EventLog<'a>,
    log_seq: u64,
    eviction_age: Millis,
    frame_bytes: usize,
    processed: u64,
}

fn kind_name(k: NodeKind) -> &'static str {
    match k {
        NodeKind::Vehicle => "vehicle",
        NodeKind::Satellite => "satellite",
        NodeKind::Gateway => "gateway",
        NodeKind::Server => "server",
        NodeKind::Workstation => "workstation",
    }
}

fn drop_reason(e: &EnqueueError) -> DropReason {
    match e {
        EnqueueError::KindFiltered(_) => DropReason::KindFiltered,
        EnqueueError::QueueFull(_) => DropReason::QueueFull,
        EnqueueError::Fragmentation(_) => DropReason::TooLarge,
    }
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, sink: Option<&'a mut dyn Write>) -> Self {
        let frame_bytes = cfg.frame_bytes();
        let eph: BTreeMap<NodeId, OrbitEphemeris> = cfg.ephemerides.iter().map(|e| (e.satellite_id, *e)).collect();
        let mut nodes = Vec::new();
        let mut index = BTreeMap::new();
        let mut positions = BTreeMap::new();
        let mut vehicles = BTreeMap::new();
        for n in &cfg.nodes {
            let name = n.name.clone().unwrap_or_else(|| format!("{}{}", kind_name(n.kind), n.id.0));
            let mut node = Node::new(n.id, n.kind, name, frame_bytes);
            node.active = n.active;
            for r in &n.routes {
                node.routes.set(r.dest, r.next_hop, r.link.clone());
            }
            if let Some(sc) = &n.satcomms {
                let radio = n
                    .radio_profile
                    .as_ref()
                    .and_then(|r| cfg.resolve_profile(r))
                    .expect("validated profile");
                let config = SatCommsConfig {
                    transmit_when_possible: sc.transmit_when_possible,
                    accepted_kinds: sc.accepted_kinds.iter().cloned().collect(),
                    ephemeris: sc.ephemeris.map(|s| eph[&s]),
                    gate_on_visibility: sc.gate_on_visibility,
                    radio,
                    destination: sc.destination,
                    resend: sc.resend,
                };
                node.satcomms = Some(SatComms::new(n.id, config, sc.queue_capacity_bytes));
            }
            if let Some(p) = n.position {
                positions.insert(n.id, p);
            }
            if let Some(m) = &n.motion {
                let mut state = VehicleState::parked(
                    n.position.unwrap_or_default(),
                    m.speed_mps.unwrap_or(cfg.airframe.cruise_speed_mps),
                    m.battery_j.unwrap_or(DEFAULT_BATTERY_J),
                );
                state.waypoints = m.waypoints.iter().copied().collect();
                state.airborne_since = m.airborne.then_some(0);
                state.executing = m.executing;
                vehicles.insert(
                    n.id,
                    VehicleRt {
                        state,
                        plan: m.waypoints.clone(),
                        landed: false,
                        flagged: false,
                        last_update: 0,
                    },
                );
            }
            index.insert(n.id, nodes.len());
            nodes.push(node);
        }
        let links = cfg
            .links
            .iter()
            .map(|l| LinkRt {
                id: l.id.clone(),
                a: l.a,
                b: l.b,
                medium: l.medium,
                per_copy_loss: l.per_copy_loss,
                latency: l.latency_ms.unwrap_or(match l.medium {
                    Medium::Radio => 0,
                    Medium::Wired => cfg.hop_latency_ms,
                }),
                gate: l.gate,
                up: l.up,
                loss: LossStream::for_link(cfg.seed, &l.id),
            })
            .collect();
        Sim {
            cfg,
            now: 0,
            events: EventQueue::default(),
            nodes,
            index,
            positions,
            vehicles,
            links,
            eph,
            schedulers: SchedulerRegistry::with_builtins(),
            ledger: DatumLedger::default(),
            metrics: Metrics::default(),
            log: EventLog::new(sink),
            log_seq: 0,
            eviction_age: cfg.eviction_age(),
            frame_bytes,
            processed: 0,
        }
    }

    fn emit(&mut self, node: Option<NodeId>, detail: LogDetail) {
        let rec = LogRecord {
            t: self.now,
            seq: self.log_seq,
            node,
            detail,
        };
        self.log_seq += 1;
        self.metrics.apply(&rec);
        self.log.push(rec);
    }

    fn schedule(&mut self, t: Millis, target: Option<NodeId>, kind: EventKind) {
        self.events.push(t, target, kind);
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[self.index[&id]]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        let i = self.index[&id];
        &mut self.nodes[i]
    }

    fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    fn start(&mut self) {
        let cfg = self.cfg;
        let header = RunHeader {
            schema: LOG_SCHEMA_VERSION,
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            duration_ms: cfg.duration_ms,
            frame_bytes: self.frame_bytes,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeInfo {
                    id: n.id,
                    kind: n.kind,
                    name: n.name.clone(),
                    redundancy: n.satcomms.as_ref().map(|s| s.config.radio.redundancy),
                })
                .collect(),
        };
        self.emit(None, LogDetail::RunStart(header));

        for (i, l) in cfg.links.iter().enumerate() {
            for c in &l.schedule {
                self.schedule(c.at_ms, None, EventKind::LinkStateChange { link: i, up: c.up });
            }
        }
        let windows: Vec<PassWindow> = self
            .eph
            .values()
            .flat_map(|e| e.windows_between(0, cfg.duration_ms).expect("valid range"))
            .collect();
        for w in windows {
            let sat = Some(w.satellite_id);
            self.schedule(
                w.start.max(0),
                sat,
                EventKind::WindowOpen {
                    satellite: w.satellite_id,
                    start: w.start,
                    end: w.end,
                },
            );
            self.schedule(
                w.end,
                sat,
                EventKind::WindowClose {
                    satellite: w.satellite_id,
                    start: w.start,
                },
            );
        }
        for (index, t) in cfg.traffic.iter().enumerate() {
            if t.count != Some(0) {
                self.schedule(
                    t.start_ms,
                    Some(t.node),
                    EventKind::EnqueueDatum(DatumSource::Traffic { index, emitted: 0 }),
                );
            }
        }
        for (index, s) in cfg.script.iter().enumerate() {
            self.schedule(
                s.at_ms,
                None,
                EventKind::ScriptStep {
                    index,
                    phase: ScriptPhase::Act,
                },
            );
        }
        if !self.nodes.is_empty() {
            self.schedule(cfg.housekeeping_ms, None, EventKind::Housekeeping);
        }
        let radios: Vec<NodeId> = self.nodes.iter().filter(|n| n.satcomms.is_some()).map(|n| n.id).collect();
        for v in radios {
            self.schedule(0, Some(v), EventKind::TickSatComms { periodic: true });
        }
    }

    fn dispatch(&mut self, target: Option<NodeId>, kind: EventKind) {
        match kind {
            EventKind::FrameArrival { from, link, packet } => {
                self.on_arrival(target.expect("arrivals have a target"), from, link, packet)
            }
            EventKind::TickSatComms { periodic } => self.on_tick(target.expect("ticks have a target"), periodic),
            EventKind::WindowOpen { satellite, start, end } => self.on_window_open(satellite, start, end),
            EventKind::WindowClose { satellite, start } => self.on_window_close(satellite, start),
            EventKind::EnqueueDatum(DatumSource::Traffic { index, emitted }) => self.on_traffic(index, emitted),
            EventKind::EnqueueDatum(DatumSource::Resend(id)) => self.on_resend(id),
            EventKind::LinkStateChange { link, up } => self.set_link(link, up),
            EventKind::ScriptStep { index, phase } => match phase {
                ScriptPhase::Act => self.on_script_act(index),
                ScriptPhase::Check => self.check_step(index),
            },
            EventKind::Housekeeping => self.on_housekeeping(),
        }
    }

    // ---- datum lifecycle

    fn datum_of_wire(&self, wire: &[u8]) -> Option<DatumId> {
        let f = decode_frame(wire, self.frame_bytes).ok()?;
        self.ledger.datum_for(NodeId(f.header.src_node), f.header.msg_id)
    }

    fn report(&mut self, id: DatumId, s: Option<Settled>, receiver: Option<NodeId>) {
        let Some(s) = s else { return };
        let (label, bytes, enqueued_at) = match self.ledger.get(id) {
            Some(e) => (e.label.clone(), e.data.len(), e.enqueued_at),
            None => return,
        };
        match s {
            Settled::Delivered => self.emit(
                receiver,
                LogDetail::DatumDelivered {
                    datum: id,
                    label,
                    bytes,
                    latency_ms: self.now - enqueued_at,
                },
            ),
            Settled::Dropped(reason) => self.emit(Some(id.node), LogDetail::DatumDropped { datum: id, label, reason }),
        }
    }

    fn lose_packet(&mut self, datum: Option<DatumId>, reason: DropReason) {
        if let Some(d) = datum {
            let s = self.ledger.packet_lost(d, reason);
            self.report(d, s, None);
        }
    }

    fn content(&mut self, node: NodeId, content: Content, size: usize) -> Vec<u8> {
        match content {
            Content::Telemetry => {
                let (p, v) = match self.vehicles.get(&node) {
                    Some(vr) => (vr.state.position, vr.state.velocity()),
                    None => (self.positions.get(&node).copied().unwrap_or_default(), [0.0; 3]),
                };
                let mut b = Vec::with_capacity(TELEMETRY_LEN);
                b.extend_from_slice(&self.now.to_be_bytes());
                b.push(node.0);
                for x in p {
                    b.extend_from_slice(&x.to_be_bytes());
                }
                for x in v {
                    b.extend_from_slice(&(x as f32).to_be_bytes());
                }
                b.resize(size, 0);
                b
            }
            Content::Pattern => (0..size as u64)
                .map(|i| ((i * 131 + self.now as u64 * 7 + node.0 as u64) % 251) as u8)
                .collect(),
        }
    }

    fn enqueue(&mut self, node: NodeId, kind: &str, data: Vec<u8>, priority: Priority, label: Option<String>) {
        let now = self.now;
        let Some(sc) = self.node_mut(node).satcomms.as_mut() else {
            return;
        };
        let (id, res) = sc.enqueue_datum(kind, &data, priority, now);
        let bytes = data.len();
        let entry = DatumEntry::new(kind, label.clone(), priority, data, now);
        match res {
            Ok(e) => {
                self.ledger.admit(id, entry, e.msg_id, e.fragments);
                self.emit(
                    Some(node),
                    LogDetail::Enqueue {
                        datum: id,
                        kind: kind.to_string(),
                        bytes,
                        fragments: e.fragments,
                        msg_id: e.msg_id,
                        priority,
                        label,
                        attempt: 0,
                    },
                );
                self.schedule(now, Some(node), EventKind::TickSatComms { periodic: false });
            }
            Err(err) => {
                let reason = drop_reason(&err);
                self.ledger.reject(id, entry, reason);
                self.emit(
                    Some(node),
                    LogDetail::EnqueueRejected {
                        datum: id,
                        kind: kind.to_string(),
                        bytes,
                        reason,
                        error: err.to_string(),
                        attempt: 0,
                    },
                );
                self.emit(Some(node), LogDetail::DatumDropped { datum: id, label, reason });
            }
        }
    }

    fn on_traffic(&mut self, index: usize, emitted: u32) {
        let t = &self.cfg.traffic[index];
        let next = emitted + 1;
        if t.count.is_none_or(|c| next < c) {
            let at = self.now + t.period_ms;
            if t.stop_ms.is_none_or(|s| at <= s) && at <= self.cfg.duration_ms {
                self.schedule(
                    at,
                    Some(t.node),
                    EventKind::EnqueueDatum(DatumSource::Traffic { index, emitted: next }),
                );
            }
        }
        if !self.node(t.node).active {
            return;
        }
        self.advance_vehicle(t.node);
        let data = self.content(t.node, t.content, t.size_bytes);
        self.enqueue(t.node, &t.kind, data, t.priority, t.label.clone());
    }

    fn on_resend(&mut self, id: DatumId) {
        if !self.ledger.resend_due(id) {
            return;
        }
        let e = self.ledger.get(id).expect("known datum");
        let (data, priority, kind, attempt) = (e.data.clone(), e.priority, e.kind.clone(), e.resends);
        let now = self.now;
        let sc = self.node_mut(id.node).satcomms.as_mut().expect("resends come from SatComms");
        match sc.requeue(id, &data, priority, now) {
            Ok(q) => {
                self.ledger.queued(id, q.msg_id, q.fragments);
                let label = self.ledger.get(id).and_then(|e| e.label.clone());
                self.emit(
                    Some(id.node),
                    LogDetail::Enqueue {
                        datum: id,
                        kind,
                        bytes: data.len(),
                        fragments: q.fragments,
                        msg_id: q.msg_id,
                        priority,
                        label,
                        attempt,
                    },
                );
                self.schedule(now, Some(id.node), EventKind::TickSatComms { periodic: false });
            }
            Err(err) => {
                let reason = drop_reason(&err);
                self.emit(
                    Some(id.node),
                    LogDetail::EnqueueRejected {
                        datum: id,
                        kind,
                        bytes: data.len(),
                        reason,
                        error: err.to_string(),
                        attempt,
                    },
                );
                let s = self.ledger.resend_failed(id, reason);
                self.report(id, s, None);
            }
        }
    }

    // ---- radio

    fn on_tick(&mut self, v: NodeId, periodic: bool) {
        if periodic {
            let at = self.now + self.cfg.tick_ms;
            if at <= self.cfg.duration_ms {
                self.schedule(at, Some(v), EventKind::TickSatComms { periodic: true });
            }
        }
        let now = self.now;
        let node = self.node_mut(v);
        if !node.active {
            return;
        }
        let Some(sc) = node.satcomms.as_mut() else { return };
        if let Some(tx) = sc.satcomms_tick(now) {
            let busy = sc.busy_until();
            self.transmit(v, tx);
            self.schedule(busy, Some(v), EventKind::TickSatComms { periodic: false });
        }
    }

    /// Link a vehicle uses to reach `peer`, radio links first.
    fn uplink_to(&self, v: NodeId, peer: NodeId) -> Option<usize> {
        let joins = |l: &LinkRt| l.joins(v, peer);
        self.links
            .iter()
            .position(|l| joins(l) && l.medium == Medium::Radio)
            .or_else(|| self.links.iter().position(joins))
    }

    fn transmit(&mut self, v: NodeId, tx: Transmission) {
        let now = self.now;
        let sc = self.node(v).satcomms.as_ref().expect("transmitter has SatComms");
        let profile = sc.config.radio.clone();
        let dest = sc.config.destination;
        let resend = sc.config.resend;
        let peer = tx.pass.map(|p| p.satellite).or(sc.config.ephemeris.map(|e| e.satellite_id)).or_else(|| {
            self.links
                .iter()
                .find(|l| l.medium == Medium::Radio && (l.a == v || l.b == v))
                .map(|l| if l.a == v { l.b } else { l.a })
        });
        let link = peer.and_then(|p| self.uplink_to(v, p));
        let open = link.is_some_and(|l| {
            LinksNow {
                links: &self.links,
                eph: &self.eph,
                now,
            }
            .open(l)
        });

        let mut copies = Vec::with_capacity(tx.copies.len());
        let mut survivors = 0;
        let mut last_loss = None;
        for c in &tx.copies {
            let lost = match link {
                None => Some(DropReason::NoRoute),
                Some(l) => {
                    let p = self.links[l].per_copy_loss.unwrap_or(profile.per_copy_loss);
                    let drawn = self.links[l].loss.sample(p);
                    if !open {
                        Some(DropReason::LinkOutage)
                    } else if drawn {
                        Some(DropReason::ChannelLoss)
                    } else {
                        None
                    }
                }
            };
            match lost {
                Some(r) => last_loss = Some(r),
                None => {
                    let l = link.expect("survivor has a link");
                    survivors += 1;
                    let packet = Packet {
                        dest,
                        origin: v,
                        wire: tx.wire.clone(),
                        sent_at: c.start,
                        pass: tx.pass,
                    };
                    self.schedule(
                        c.end + self.links[l].latency,
                        peer,
                        EventKind::FrameArrival { from: v, link: l, packet },
                    );
                }
            }
            copies.push(CopyRecord {
                start: c.start,
                end: c.end,
                lost,
            });
        }

        if let Some(vr) = self.vehicles.get_mut(&v) {
            vr.state.battery_j = (vr.state.battery_j - tx.energy_j).max(0.0);
        }
        let airtime = profile.fragment_airtime();
        let record = TransmitRecord {
            datum: tx.datum,
            msg_id: tx.header.msg_id,
            frag_index: tx.header.frag_index,
            frag_total: tx.header.frag_total,
            payload_len: tx.header.payload_len,
            frame: hex::encode(&tx.wire),
            to: peer,
            link: link.map(|l| self.links[l].id.clone()),
            copies,
            airtime_ms: airtime,
            idle_ms: tx.idle_ms,
            energy_j: tx.energy_j,
            tx_energy_j: energy_of(&profile, airtime, 0),
            pass: tx.pass,
            last_fragment: tx.last_fragment,
        };
        self.emit(Some(v), LogDetail::Transmit(record));

        if tx.last_fragment {
            if let Some(policy) = resend {
                let done = self.ledger.get(tx.datum).map_or(u32::MAX, |e| e.resends);
                if done < policy.max_attempts {
                    self.ledger.resend_scheduled(tx.datum);
                    self.schedule(
                        now + airtime + policy.after_ms,
                        Some(v),
                        EventKind::EnqueueDatum(DatumSource::Resend(tx.datum)),
                    );
                }
            }
        }
        let s = self.ledger.transmitted(tx.datum, survivors, last_loss);
        self.report(tx.datum, s, None);
    }

    // ---- network

    fn forward(&mut self, at: NodeId, next_hop: NodeId, link: usize, packet: Packet, datum: Option<DatumId>) -> bool {
        let p = self.links[link].per_copy_loss.unwrap_or(0.0);
        let lost = self.links[link].loss.sample(p);
        if lost {
            self.lose_packet(datum, DropReason::ChannelLoss);
        } else {
            let t = self.now + self.links[link].latency;
            self.schedule(t, Some(next_hop), EventKind::FrameArrival { from: at, link, packet });
        }
        lost
    }

    fn on_arrival(&mut self, to: NodeId, from: NodeId, link: usize, packet: Packet) {
        let now = self.now;
        let decoded = decode_frame(&packet.wire, self.frame_bytes).ok();
        let datum = decoded
            .as_ref()
            .and_then(|f| self.ledger.datum_for(NodeId(f.header.src_node), f.header.msg_id));
        let payload_len = decoded.as_ref().map(|f| f.header.payload_len);
        let frame = hex::encode(&packet.wire);
        let pass = packet.pass;
        let link_id = self.links[link].id.clone();
        let mut settled: Vec<(DatumId, Settled, Option<NodeId>)> = Vec::new();
        let mut forward = None;

        let outcome = if !self.links[link].up {
            if let Some(d) = datum {
                if let Some(s) = self.ledger.packet_lost(d, DropReason::LinkOutage) {
                    settled.push((d, s, None));
                }
            }
            ArrivalOutcome::LinkDown
        } else {
            let view = LinksNow {
                links: &self.links,
                eph: &self.eph,
                now,
            };
            let i = self.index[&to];
            match self.nodes[i].on_receive(packet, now, &view) {
                ReceiveEffect::Inactive => {
                    if let Some(d) = datum {
                        if let Some(s) = self.ledger.packet_lost(d, DropReason::NodeInactive) {
                            settled.push((d, s, None));
                        }
                    }
                    ArrivalOutcome::NodeInactive
                }
                ReceiveEffect::DecodeError(e) => {
                    if let Some(d) = datum {
                        if let Some(s) = self.ledger.packet_lost(d, DropReason::DecodeError) {
                            settled.push((d, s, None));
                        }
                    }
                    ArrivalOutcome::DecodeError { error: e.to_string() }
                }
                ReceiveEffect::Reassembled { fragment, outcome } => {
                    let key = fragment.key();
                    match outcome {
                        IngestOutcome::Stored => {
                            if let Some(d) = datum {
                                if let Some(s) = self.ledger.arrived(d, to, Some(key)) {
                                    settled.push((d, s, None));
                                }
                            }
                            ArrivalOutcome::Stored
                        }
                        IngestOutcome::Duplicate => {
                            if let Some(d) = datum {
                                if let Some(s) = self.ledger.arrived(d, to, None) {
                                    settled.push((d, s, None));
                                }
                            }
                            ArrivalOutcome::Duplicate
                        }
                        IngestOutcome::Completed(data) => {
                            if let Some(d) = datum {
                                if let Some(s) = self.ledger.completed(d, to, key, &data) {
                                    settled.push((d, s, Some(to)));
                                }
                            }
                            ArrivalOutcome::Completed
                        }
                        IngestOutcome::Conflict => {
                            for (d, s) in self.ledger.conflict(datum, to, key) {
                                settled.push((d, s, None));
                            }
                            ArrivalOutcome::Conflict
                        }
                    }
                }
                ReceiveEffect::Forward {
                    next_hop,
                    link: out,
                    packet,
                    ..
                } => {
                    forward = Some((next_hop, out, packet));
                    ArrivalOutcome::Forwarded {
                        next_hop,
                        via: self.links[out].id.clone(),
                        lost: false,
                    }
                }
                ReceiveEffect::Stored { reason, .. } => ArrivalOutcome::Held { reason },
            }
        };

        let outcome = match (forward, outcome) {
            (Some((next_hop, out, packet)), ArrivalOutcome::Forwarded { via, .. }) => {
                // loss is drawn before logging so the record carries it
                let p = self.links[out].per_copy_loss.unwrap_or(0.0);
                let lost = self.links[out].loss.sample(p);
                if lost {
                    if let Some(d) = datum {
                        if let Some(s) = self.ledger.packet_lost(d, DropReason::ChannelLoss) {
                            settled.push((d, s, None));
                        }
                    }
                } else {
                    let t = now + self.links[out].latency;
                    self.schedule(t, Some(next_hop), EventKind::FrameArrival { from: to, link: out, packet });
                }
                ArrivalOutcome::Forwarded { next_hop, via, lost }
            }
            (_, o) => o,
        };

        self.emit(
            Some(to),
            LogDetail::FrameArrival(ArrivalRecord {
                from,
                link: link_id,
                frame,
                outcome,
                datum,
                payload_len,
                pass,
            }),
        );
        for (d, s, rx) in settled {
            self.report(d, Some(s), rx);
        }
    }

    fn flush_stores(&mut self) {
        for i in 0..self.nodes.len() {
            if self.nodes[i].store.is_empty() {
                continue;
            }
            let view = LinksNow {
                links: &self.links,
                eph: &self.eph,
                now: self.now,
            };
            let drained = self.nodes[i].drain_store(&view);
            if drained.is_empty() {
                continue;
            }
            let at = self.nodes[i].id;
            let mut per_hop: BTreeMap<NodeId, u64> = BTreeMap::new();
            for (_, hop, _) in &drained {
                *per_hop.entry(*hop).or_default() += 1;
            }
            for (next_hop, packets) in per_hop {
                self.emit(Some(at), LogDetail::StoreFlush { next_hop, packets });
            }
            for (sp, hop, link) in drained {
                let d = self.datum_of_wire(&sp.packet.wire);
                self.forward(at, hop, link, sp.packet, d);
            }
        }
    }

    fn set_link(&mut self, link: usize, up: bool) {
        self.links[link].up = up;
        let id = self.links[link].id.clone();
        self.emit(None, LogDetail::LinkState { link: id, up });
        if up {
            self.flush_stores();
        }
    }

    // ---- passes

    fn tracking(&self, sat: NodeId) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| {
                n.satcomms
                    .as_ref()
                    .is_some_and(|s| s.config.ephemeris.is_some_and(|e| e.satellite_id == sat))
            })
            .map(|n| n.id)
            .collect()
    }

    fn on_window_open(&mut self, sat: NodeId, start: Millis, end: Millis) {
        self.emit(Some(sat), LogDetail::WindowOpen { satellite: sat, start, end });
        let window = PassWindow {
            start,
            end,
            satellite_id: sat,
        };
        if let Some(name) = self.cfg.uplink_scheduler.as_deref() {
            self.assign_slots(name, window);
        }
        self.flush_stores();
        for v in self.tracking(sat) {
            self.schedule(self.now, Some(v), EventKind::TickSatComms { periodic: false });
        }
    }

    fn assign_slots(&mut self, scheduler: &str, window: PassWindow) {
        let vehicles: Vec<NodeId> = self
            .tracking(window.satellite_id)
            .into_iter()
            .filter(|v| {
                let n = self.node(*v);
                n.active && n.satcomms.as_ref().is_some_and(|s| s.config.gate_on_visibility)
            })
            .collect();
        let Some(first) = vehicles.first() else { return };
        let quantum = self.node(*first).satcomms.as_ref().expect("tracking").config.radio.fragment_airtime();
        let demands: Vec<VehicleDemand> = vehicles
            .iter()
            .map(|v| VehicleDemand {
                vehicle: *v,
                queued_bytes: self.node(*v).satcomms.as_ref().expect("tracking").queued_bytes() as u64,
            })
            .collect();
        let clipped = PassWindow {
            start: window.start.max(self.now),
            ..window
        };
        let sched = self.schedulers.get(scheduler).expect("validated scheduler");
        let assignments = sched.assign(&demands, &clipped, quantum);
        let name = sched.name().to_string();
        for a in &assignments {
            let sc = self.node_mut(a.vehicle).satcomms.as_mut().expect("tracking");
            sc.slot = match a.slot {
                Some((start, end)) => SlotGate::Slot { window, start, end },
                None => SlotGate::NoSlot { window },
            };
            if let Some((start, _)) = a.slot {
                self.schedule(start, Some(a.vehicle), EventKind::TickSatComms { periodic: false });
            }
        }
        self.emit(
            Some(window.satellite_id),
            LogDetail::SlotAssigned(SlotRecord {
                satellite: window.satellite_id,
                window_start: window.start,
                window_end: window.end,
                scheduler: name,
                quantum_ms: quantum,
                assignments,
            }),
        );
    }

    fn on_window_close(&mut self, sat: NodeId, start: Millis) {
        for v in self.tracking(sat) {
            let sc = self.node_mut(v).satcomms.as_mut().expect("tracking");
            let stale = match sc.slot {
                SlotGate::Slot { window, .. } | SlotGate::NoSlot { window } => window.start == start,
                SlotGate::Unscheduled => false,
            };
            if stale {
                sc.slot = SlotGate::Unscheduled;
            }
        }
        self.emit(Some(sat), LogDetail::WindowClose { satellite: sat, start });
    }

    // ---- housekeeping

    fn advance_vehicle(&mut self, id: NodeId) {
        let now = self.now;
        let airframe = &self.cfg.airframe;
        if let Some(vr) = self.vehicles.get_mut(&id) {
            let dt = now - vr.last_update;
            if dt > 0 {
                vr.state = step_vehicle(&vr.state, dt, airframe).expect("positive step");
                vr.last_update = now;
            }
        }
    }

    fn advance_vehicles(&mut self) {
        let ids: Vec<NodeId> = self.vehicles.keys().copied().collect();
        for id in ids {
            self.advance_vehicle(id);
        }
        let limit = self.cfg.airframe.endurance_ms;
        let now = self.now;
        let mut flagged = Vec::new();
        for (id, vr) in self.vehicles.iter_mut() {
            if let Some(since) = vr.state.airborne_since {
                if !vr.flagged && now - since > limit {
                    vr.flagged = true;
                    flagged.push((*id, now - since));
                }
            }
        }
        for (id, airborne_ms) in flagged {
            self.emit(
                Some(id),
                LogDetail::EnduranceViolation {
                    airborne_ms,
                    limit_ms: limit,
                },
            );
        }
    }

    fn on_housekeeping(&mut self) {
        let next = self.now + self.cfg.housekeeping_ms;
        if next <= self.cfg.duration_ms {
            self.schedule(next, None, EventKind::Housekeeping);
        }
        self.advance_vehicles();
        let (now, age) = (self.now, self.eviction_age);
        for i in 0..self.nodes.len() {
            let at = self.nodes[i].id;
            for key in self.nodes[i].reassembly.evict_stale(now, age) {
                let hit = self.ledger.evicted(at, key);
                self.emit(
                    Some(at),
                    LogDetail::ReassemblyEvicted {
                        src: key.src,
                        msg_id: key.msg_id,
                        datum: hit.map(|h| h.0),
                    },
                );
                if let Some((d, s)) = hit {
                    self.report(d, s, None);
                }
            }
            for sp in self.nodes[i].expire_store(now, age) {
                let d = self.datum_of_wire(&sp.packet.wire);
                self.emit(
                    Some(at),
                    LogDetail::StoreExpired {
                        datum: d,
                        reason: sp.reason,
                    },
                );
                let reason = match sp.reason {
                    StoreReason::NoRoute => DropReason::NoRoute,
                    StoreReason::LinkDown => DropReason::StoreExpired,
                };
                self.lose_packet(d, reason);
            }
        }
        self.flush_stores();
    }

    // ---- script

    fn on_script_act(&mut self, index: usize) {
        self.advance_vehicles();
        let step: &'a ScriptStep = &self.cfg.script[index];
        for a in &step.actions {
            self.apply_action(&step.name, a);
        }
        match step.check_at_ms {
            Some(t) if t > self.now => self.schedule(
                t,
                None,
                EventKind::ScriptStep {
                    index,
                    phase: ScriptPhase::Check,
                },
            ),
            _ => self.check_step(index),
        }
    }

    fn check_step(&mut self, index: usize) {
        self.advance_vehicles();
        let step: &'a ScriptStep = &self.cfg.script[index];
        let mut ok = self.eval(&step.expect);
        let mut attempts = 1;
        if !ok && !step.retry.is_empty() {
            for a in &step.retry {
                self.apply_action(&step.name, a);
            }
            attempts = 2;
            ok = self.eval(&step.expect);
        }
        let observed = Outcome::from_bool(ok);
        self.emit(
            None,
            LogDetail::ScriptResult(ScriptOutcome {
                index,
                name: step.name.clone(),
                row: step.row.clone(),
                expected: step.expected,
                observed,
                passed: observed == step.expected,
                attempts,
                extension: step.extension,
            }),
        );
    }

    fn apply_action(&mut self, step: &str, action: &Action) {
        let error = self.try_action(action).err();
        self.emit(
            None,
            LogDetail::ScriptAction {
                step: step.to_string(),
                action: action.clone(),
                error,
            },
        );
    }

    fn vehicle_mut(&mut self, id: NodeId) -> Result<&mut VehicleRt, String> {
        self.vehicles.get_mut(&id).ok_or_else(|| format!("node {} has no motion", id.0))
    }

    fn satcomms_mut(&mut self, id: NodeId) -> Result<&mut SatComms, String> {
        self.node_mut(id)
            .satcomms
            .as_mut()
            .ok_or_else(|| format!("node {} has no SatComms", id.0))
    }

    fn try_action(&mut self, action: &Action) -> Result<(), String> {
        let now = self.now;
        match action {
            Action::SetLink { link, up } => {
                let i = self.link_index(link).ok_or_else(|| format!("unknown link {link:?}"))?;
                self.set_link(i, *up);
            }
            Action::SetRoute {
                node,
                dest,
                next_hop,
                link,
            } => {
                let previous = self.node(*node).routes.entries.get(dest).cloned();
                self.node_mut(*node).routes.set(*dest, *next_hop, link.clone());
                let all = self.nodes.iter().map(|n| (n.id, n.routes.clone())).collect();
                if let Err(e) = check_routes(&all) {
                    let table = &mut self.node_mut(*node).routes;
                    match previous {
                        Some(p) => {
                            table.entries.insert(*dest, p);
                        }
                        None => {
                            table.entries.remove(dest);
                        }
                    }
                    return Err(e.to_string());
                }
                self.flush_stores();
            }
            Action::RemoveRoute { node, dest } => {
                self.node_mut(*node).routes.entries.remove(dest);
            }
            Action::PowerUp { node } => {
                self.node_mut(*node).active = true;
                self.flush_stores();
            }
            Action::PowerDown { node } => self.node_mut(*node).active = false,
            Action::Takeoff { node } => {
                let v = self.vehicle_mut(*node)?;
                if v.state.airborne() {
                    return Err("already airborne".into());
                }
                v.state.airborne_since = Some(now);
                v.landed = false;
            }
            Action::Land { node } => {
                let v = self.vehicle_mut(*node)?;
                if !v.state.airborne() {
                    return Err("not airborne".into());
                }
                v.state.airborne_since = None;
                v.state.executing = false;
                v.landed = true;
            }
            Action::UploadPlan { node, waypoints } => {
                if waypoints.is_empty() {
                    return Err("survey plan has no waypoints".into());
                }
                self.vehicle_mut(*node)?.plan = waypoints.clone();
            }
            Action::StartPlan { node } => {
                let v = self.vehicle_mut(*node)?;
                if v.plan.is_empty() {
                    return Err("no plan loaded".into());
                }
                v.state.waypoints = v.plan.iter().copied().collect();
                v.state.executing = true;
            }
            Action::ConfigureSatellite { node, ephemeris } => {
                let e = *self.eph.get(ephemeris).ok_or("unknown ephemeris")?;
                self.satcomms_mut(*node)?.config.ephemeris = Some(e);
            }
            Action::SetTransmit { node, enabled } => {
                self.satcomms_mut(*node)?.config.transmit_when_possible = *enabled;
                if *enabled {
                    self.schedule(now, Some(*node), EventKind::TickSatComms { periodic: false });
                }
            }
            Action::Enqueue {
                node,
                kind,
                size_bytes,
                content,
                priority,
                label,
            } => {
                self.satcomms_mut(*node)?;
                self.advance_vehicle(*node);
                let data = self.content(*node, *content, *size_bytes);
                self.enqueue(*node, kind, data, *priority, label.clone());
            }
        }
        Ok(())
    }

    fn position(&self, id: NodeId) -> Option<[f64; 3]> {
        self.vehicles
            .get(&id)
            .map(|v| v.state.position)
            .or_else(|| self.positions.get(&id).copied())
    }

    fn path_reachable(&self, from: NodeId, dest: NodeId) -> bool {
        let mut cur = from;
        let mut seen = BTreeSet::new();
        loop {
            let Some(&i) = self.index.get(&cur) else { return false };
            let node = &self.nodes[i];
            if !node.active {
                return false;
            }
            if cur == dest {
                return true;
            }
            if !seen.insert(cur) {
                return false;
            }
            let Some(entry) = node.routes.lookup(dest) else { return false };
            let hop = entry.next_hop;
            let pinned = entry.link.as_deref();
            if !self
                .links
                .iter()
                .any(|l| l.up && l.joins(cur, hop) && pinned.is_none_or(|p| p == l.id))
            {
                return false;
            }
            cur = hop;
        }
    }

    fn eval(&self, e: &Expect) -> bool {
        let nm = |id: NodeId| self.metrics.node(id).cloned().unwrap_or_default();
        match e {
            Expect::Always => true,
            Expect::LinkUp { link } => self.link_index(link).is_some_and(|i| self.links[i].up),
            Expect::RouteConfigured { node, dest } => self.node(*node).routes.lookup(*dest).is_some(),
            Expect::PathReachable { from, dest } => self.path_reachable(*from, *dest),
            Expect::NodeActive { node } => self.node(*node).active,
            Expect::SatCommsArmed {
                node,
                transmit,
                ephemeris,
            } => {
                let n = self.node(*node);
                n.active
                    && n.satcomms.as_ref().is_some_and(|s| {
                        s.active
                            && transmit.is_none_or(|t| s.config.transmit_when_possible == t)
                            && ephemeris.is_none_or(|e| s.config.ephemeris.is_some() == e)
                    })
            }
            Expect::Transmitting { node, min_frames } => nm(*node).frames_sent >= *min_frames,
            Expect::Received { node, min_frames } => nm(*node).frames_received >= *min_frames,
            Expect::DatumDelivered { label } => self.metrics.delivered_labels.get(label).is_some_and(|n| *n > 0),
            Expect::DeliveredFrom { node, min } => nm(*node).datums_delivered >= *min,
            Expect::InRange { a, b, max_m } => match (self.position(*a), self.position(*b)) {
                (Some(pa), Some(pb)) => distance(&pa, &pb) <= *max_m,
                _ => false,
            },
            Expect::Airborne { node, airborne } => {
                self.vehicles.get(node).is_some_and(|v| v.state.airborne() == *airborne)
            }
            Expect::PlanLoaded { node } => self.vehicles.get(node).is_some_and(|v| !v.plan.is_empty()),
            Expect::PlanExecuting { node } => self
                .vehicles
                .get(node)
                .is_some_and(|v| v.state.executing && v.state.airborne()),
            Expect::LoiterTransmitting { node } => {
                let loitering = self
                    .vehicles
                    .get(node)
                    .is_some_and(|v| v.state.executing && v.state.loitering());
                loitering && nm(*node).last_tx_at.is_some_and(|t| self.now - t <= 5_000)
            }
            Expect::Landed { node } => self
                .vehicles
                .get(node)
                .is_some_and(|v| v.landed && !v.state.airborne()),
            Expect::PassRawBytes {
                satellite,
                window_start_ms,
                expected,
                tolerance,
            } => {
                let raw = self
                    .metrics
                    .pass(PassTag {
                        satellite: *satellite,
                        window_start: *window_start_ms,
                    })
                    .map_or(0, |p| p.bytes_raw);
                raw.abs_diff(*expected) <= *tolerance
            }
            Expect::RedundancyAccounting { sender, receiver } => {
                let Some(r) = self.node(*sender).satcomms.as_ref().map(|s| s.config.radio.redundancy as u64) else {
                    return false;
                };
                let (s, rx) = (nm(*sender), nm(*receiver));
                s.frames_sent > 0
                    && s.copies_sent == r * s.frames_sent
                    && rx.frames_new == s.frames_sent
                    && rx.duplicates == (r - 1) * rx.frames_new
            }
            Expect::SlotsDisjoint => {
                !self.metrics.slots.is_empty()
                    && self.metrics.slots.iter().all(|rec| {
                        let mut spans: Vec<(Millis, Millis)> = rec.assignments.iter().filter_map(|a| a.slot).collect();
                        spans.sort();
                        spans.iter().all(|s| s.0 >= rec.window_start && s.1 <= rec.window_end && s.0 < s.1)
                            && spans.windows(2).all(|p| p[0].1 <= p[1].0)
                    })
            }
            Expect::All { checks } => checks.iter().all(|c| self.eval(c)),
        }
    }

    // ---- end of run

    fn finish(&mut self) {
        self.now = self.cfg.duration_ms;
        self.advance_vehicles();
        let now = self.now;
        let mut standby = Vec::new();
        for n in self.nodes.iter_mut() {
            if let Some(sc) = n.satcomms.as_mut() {
                let (idle_ms, energy_j) = sc.finalize_energy(now);
                standby.push(FinalStandby {
                    node: n.id,
                    idle_ms,
                    energy_j,
                });
            }
        }
        let resident = self.resident_datums().len() as u64;
        let (enqueued, delivered, dropped, stored) = self.ledger.totals();
        let events = self.processed;
        self.emit(
            None,
            LogDetail::RunEnd(RunSummary {
                enqueued,
                delivered,
                dropped,
                stored,
                resident,
                standby,
                events,
            }),
        );
    }

    /// Undelivered datums found by scanning queues, pending events, relay
    /// stores and partial buffers, independently of the ledger counters.
    fn resident_datums(&self) -> BTreeSet<DatumId> {
        let mut found = BTreeSet::new();
        for n in &self.nodes {
            if let Some(sc) = &n.satcomms {
                found.extend(sc.queue.entries().map(|e| e.datum));
            }
            for sp in &n.store {
                found.extend(self.datum_of_wire(&sp.packet.wire));
            }
            for k in n.reassembly.keys() {
                found.extend(self.ledger.datum_for(k.src, k.msg_id));
            }
        }
        for ev in self.events.iter() {
            match &ev.kind {
                EventKind::FrameArrival { packet, .. } => found.extend(self.datum_of_wire(&packet.wire)),
                EventKind::EnqueueDatum(DatumSource::Resend(id)) => {
                    found.insert(*id);
                }
                _ => {}
            }
        }
        found.retain(|d| self.ledger.get(*d).is_some_and(|e| e.state != DatumState::Delivered));
        found
    }
}
