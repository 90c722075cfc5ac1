//! Scenario generators and log queries shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use satdtn::dtn::{NodeKind, Priority, ResendPolicy, DEFAULT_DATUM_KIND};
use satdtn::orbit::OrbitEphemeris;
use satdtn::sim::config::{
    Content, LinkChange, LinkConfig, Medium, NodeConfig, ProfileRef, RouteSpec, SatCommsSpec, ScenarioConfig,
    TrafficConfig,
};
use satdtn::sim::log::{ArrivalOutcome, LogDetail, LogRecord};
use satdtn::sim::script::{Action, Expect, Outcome, ScriptStep};
use satdtn::{Millis, NodeId};

pub const SAT: NodeId = NodeId(2);
pub const WS: NodeId = NodeId(6);

pub fn bare_node(id: NodeId, kind: NodeKind) -> NodeConfig {
    NodeConfig {
        id,
        name: None,
        kind,
        active: true,
        position: None,
        radio_profile: None,
        satcomms: None,
        motion: None,
        routes: vec![],
    }
}

pub fn radio_vehicle(id: NodeId, satcomms: SatCommsSpec) -> NodeConfig {
    NodeConfig {
        position: Some([0.0; 3]),
        radio_profile: Some(ProfileRef::Named("HUMSAT".into())),
        satcomms: Some(satcomms),
        ..bare_node(id, NodeKind::Vehicle)
    }
}

pub fn satcomms_to(dest: NodeId, ephemeris: Option<NodeId>) -> SatCommsSpec {
    SatCommsSpec {
        transmit_when_possible: true,
        accepted_kinds: vec![DEFAULT_DATUM_KIND.into()],
        ephemeris,
        gate_on_visibility: ephemeris.is_some(),
        destination: dest,
        queue_capacity_bytes: 1_000_000,
        resend: None,
    }
}

pub fn plain_link(id: &str, a: NodeId, b: NodeId, medium: Medium) -> LinkConfig {
    LinkConfig {
        id: id.into(),
        a,
        b,
        medium,
        latency_ms: None,
        per_copy_loss: None,
        up: true,
        gate: None,
        schedule: vec![],
    }
}

pub fn pattern_traffic(node: NodeId, size: usize, start_ms: Millis, period_ms: Millis, count: Option<u32>) -> TrafficConfig {
    TrafficConfig {
        node,
        kind: DEFAULT_DATUM_KIND.into(),
        content: Content::Pattern,
        size_bytes: size,
        start_ms,
        period_ms,
        stop_ms: None,
        count,
        priority: Priority::Normal,
        label: None,
    }
}

pub fn empty_scenario(name: &str, duration_ms: Millis) -> ScenarioConfig {
    ScenarioConfig {
        name: name.into(),
        description: String::new(),
        seed: 1,
        duration_ms,
        tick_ms: 100,
        housekeeping_ms: 1_000,
        hop_latency_ms: 50,
        eviction_age_ms: None,
        frame_bytes: None,
        uplink_scheduler: None,
        radio_profiles: BTreeMap::new(),
        airframe: Default::default(),
        nodes: vec![],
        ephemerides: vec![],
        links: vec![],
        traffic: vec![],
        script: vec![],
    }
}

/// One vehicle with far more queued than a single 300 s pass can carry.
pub fn saturated_pass() -> ScenarioConfig {
    let mut cfg = empty_scenario("saturated_pass", 400_000);
    cfg.ephemerides.push(OrbitEphemeris {
        satellite_id: SAT,
        last_passage: 50_000,
        period: 5_802_000,
        window: 300_000,
    });
    let mut sat = bare_node(SAT, NodeKind::Satellite);
    sat.routes.push(RouteSpec {
        dest: WS,
        next_hop: WS,
        link: None,
    });
    cfg.nodes = vec![
        radio_vehicle(NodeId(1), satcomms_to(WS, Some(SAT))),
        sat,
        bare_node(WS, NodeKind::Workstation),
    ];
    let mut sdr = plain_link("sdr", NodeId(1), SAT, Medium::Radio);
    sdr.gate = Some(SAT);
    cfg.links = vec![sdr, plain_link("lan", SAT, WS, Medium::Wired)];
    cfg.traffic.push(pattern_traffic(NodeId(1), 6_000, 0, 1_000, Some(3)));
    cfg
}

/// Random topology for conservation checks: 1-4 vehicles, one satellite, a
/// chain of 0-2 relays to the workstation, arbitrary loss, outages, power
/// cycling, bounded queues, resends and short eviction ages.
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = rng.gen_range(60..600) * 1_000;
    let mut cfg = empty_scenario(&format!("random_{seed}"), duration);
    cfg.seed = rng.gen();
    cfg.eviction_age_ms = Some(rng.gen_range(10..200) * 1_000);
    cfg.uplink_scheduler = match rng.gen_range(0..3) {
        0 => None,
        1 => Some("proportional".into()),
        _ => Some("equal".into()),
    };

    let period = rng.gen_range(30..300) * 1_000;
    cfg.ephemerides.push(OrbitEphemeris {
        satellite_id: SAT,
        last_passage: rng.gen_range(-period..period),
        period,
        window: rng.gen_range(5_000..=period),
    });

    // satellite -> relays -> workstation
    let relays: Vec<NodeId> = (0..rng.gen_range(0..=2)).map(|i| NodeId(3 + i)).collect();
    let chain: Vec<NodeId> = std::iter::once(SAT).chain(relays.iter().copied()).chain([WS]).collect();
    let mut sat = bare_node(SAT, NodeKind::Satellite);
    sat.active = rng.gen_bool(0.9);
    cfg.nodes.push(sat);
    for &r in &relays {
        cfg.nodes.push(bare_node(r, NodeKind::Gateway));
    }
    cfg.nodes.push(bare_node(WS, NodeKind::Workstation));
    for (i, hop) in chain.windows(2).enumerate() {
        let id = format!("wire{i}");
        let mut l = plain_link(&id, hop[0], hop[1], Medium::Wired);
        if rng.gen_bool(0.3) {
            l.per_copy_loss = Some(rng.gen_range(0.0..=1.0));
        }
        l.up = rng.gen_bool(0.8);
        let mut t = 0;
        for _ in 0..rng.gen_range(0..4) {
            t += rng.gen_range(1..duration / 2);
            l.schedule.push(LinkChange {
                at_ms: t,
                up: rng.gen_bool(0.5),
            });
        }
        cfg.links.push(l);
        if rng.gen_bool(0.93) {
            let at = cfg.nodes.iter_mut().find(|n| n.id == hop[0]).unwrap();
            at.routes.push(RouteSpec {
                dest: WS,
                next_hop: hop[1],
                link: None,
            });
        }
    }

    let n_vehicles = rng.gen_range(1..=4);
    for v in 0..n_vehicles {
        let id = NodeId(10 + v);
        let mut sc = satcomms_to(WS, Some(SAT));
        sc.gate_on_visibility = rng.gen_bool(0.7);
        sc.queue_capacity_bytes = rng.gen_range(100..30_000);
        if rng.gen_bool(0.5) {
            sc.resend = Some(ResendPolicy {
                after_ms: rng.gen_range(1..60) * 1_000,
                max_attempts: rng.gen_range(0..3),
            });
        }
        cfg.nodes.push(radio_vehicle(id, sc));
        let mut l = plain_link(&format!("sdr{v}"), id, SAT, Medium::Radio);
        l.per_copy_loss = Some(match rng.gen_range(0..4) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..=1.0),
        });
        if rng.gen_bool(0.5) {
            l.gate = Some(SAT);
        }
        cfg.links.push(l);
        for _ in 0..rng.gen_range(1..=2) {
            let mut t = pattern_traffic(
                id,
                rng.gen_range(0..7_000),
                rng.gen_range(0..duration / 2),
                rng.gen_range(1..30) * 1_000,
                Some(rng.gen_range(1..20)),
            );
            if rng.gen_bool(0.1) {
                t.kind = "Unaccepted".into();
            }
            cfg.traffic.push(t);
        }
    }

    // power cycling of random nodes
    let ids: Vec<NodeId> = cfg.nodes.iter().map(|n| n.id).collect();
    for i in 0..rng.gen_range(0..4) {
        let node = ids[rng.gen_range(0..ids.len())];
        let action = if rng.gen_bool(0.5) {
            Action::PowerDown { node }
        } else {
            Action::PowerUp { node }
        };
        cfg.script.push(ScriptStep {
            name: format!("toggle {i}"),
            row: String::new(),
            at_ms: rng.gen_range(0..duration),
            check_at_ms: None,
            actions: vec![action],
            expect: Expect::Always,
            expected: Outcome::Pass,
            retry: vec![],
            extension: true,
        });
    }
    cfg
}

/// Per-copy loss flags of every transmission sent over `link`, in order.
pub fn copy_losses(records: &[LogRecord], link: &str) -> Vec<Vec<bool>> {
    records
        .iter()
        .filter_map(|r| match &r.detail {
            LogDetail::Transmit(t) if t.link.as_deref() == Some(link) => {
                Some(t.copies.iter().map(|c| c.lost.is_some()).collect())
            }
            _ => None,
        })
        .collect()
}

/// Payload bytes of first-received fragments at `node`, per originating
/// vehicle, for frames sent in the pass starting at `window_start`.
pub fn goodput_by_origin(records: &[LogRecord], node: NodeId, window_start: Millis) -> BTreeMap<NodeId, u64> {
    let mut out = BTreeMap::new();
    for r in records {
        if r.node != Some(node) {
            continue;
        }
        if let LogDetail::FrameArrival(a) = &r.detail {
            let in_pass = a.pass.is_some_and(|p| p.window_start == window_start);
            if in_pass && matches!(a.outcome, ArrivalOutcome::Stored | ArrivalOutcome::Completed) {
                if let Some(d) = a.datum {
                    *out.entry(d.node).or_default() += a.payload_len.unwrap_or(0) as u64;
                }
            }
        }
    }
    out
}
