//! Canned scenarios: the bench test, the communication dry run, the field
//! mission and the multi-vehicle probe, each carrying its scripted checks.
//!
//! Builders are pure. Every scenario is also reachable by name through
//! [`ScenarioRegistry`], which the CLI uses to run and export them.

use std::collections::BTreeMap;

use crate::dtn::{NodeKind, Priority, ResendPolicy};
use crate::linkmodel::HUMSAT;
use crate::orbit::OrbitEphemeris;
use crate::sim::config::{
    ConfigError, Content, LinkChange, LinkConfig, Medium, MotionSpec, NodeConfig, ProfileRef, RouteSpec,
    SatCommsSpec, ScenarioConfig, TrafficConfig,
};
use crate::sim::script::{Action, Expect, Outcome, ScriptStep};
use crate::{Millis, NodeId};

pub const VEHICLE: NodeId = NodeId(1);
pub const SATELLITE: NodeId = NodeId(2);
pub const GATEWAY_A: NodeId = NodeId(3);
pub const SERVER: NodeId = NodeId(4);
pub const GATEWAY_B: NodeId = NodeId(5);
pub const WORKSTATION: NodeId = NodeId(6);
/// Id of the first vehicle in multi-vehicle scenarios.
pub const FIRST_FLEET_ID: u8 = 10;

pub const DEFAULT_SEED: u64 = 2017;

const SECOND: Millis = 1_000;

/// Telemetry label used by the dry run and field trial.
pub const TELEMETRY_LABEL: &str = "telemetry";
pub const SURVEY_LABEL: &str = "survey";
pub const BENCH_LABEL: &str = "bench";

pub fn image_part_label(i: usize) -> String {
    format!("image_part_{i}")
}

// ---- small constructors

fn node(id: NodeId, kind: NodeKind, name: &str) -> NodeConfig {
    NodeConfig {
        id,
        name: Some(name.into()),
        kind,
        active: true,
        position: None,
        radio_profile: None,
        satcomms: None,
        motion: None,
        routes: Vec::new(),
    }
}

fn vehicle(id: NodeId, name: &str, position: [f64; 3], satcomms: SatCommsSpec) -> NodeConfig {
    NodeConfig {
        position: Some(position),
        radio_profile: Some(ProfileRef::Named(HUMSAT.into())),
        satcomms: Some(satcomms),
        ..node(id, NodeKind::Vehicle, name)
    }
}

fn satcomms(ephemeris: Option<NodeId>) -> SatCommsSpec {
    SatCommsSpec {
        transmit_when_possible: true,
        accepted_kinds: vec![crate::dtn::DEFAULT_DATUM_KIND.into()],
        ephemeris,
        gate_on_visibility: true,
        destination: WORKSTATION,
        queue_capacity_bytes: 1_000_000,
        resend: None,
    }
}

fn link(id: &str, a: NodeId, b: NodeId, medium: Medium) -> LinkConfig {
    LinkConfig {
        id: id.into(),
        a,
        b,
        medium,
        latency_ms: None,
        per_copy_loss: None,
        up: true,
        gate: None,
        schedule: Vec::new(),
    }
}

fn route(dest: NodeId, next_hop: NodeId) -> RouteSpec {
    RouteSpec {
        dest,
        next_hop,
        link: None,
    }
}

fn step(name: &str, row: &str, at_s: i64, actions: Vec<Action>, expect: Expect) -> ScriptStep {
    ScriptStep {
        name: name.into(),
        row: row.into(),
        at_ms: at_s * SECOND,
        check_at_ms: None,
        actions,
        expect,
        expected: Outcome::Pass,
        retry: Vec::new(),
        extension: false,
    }
}

fn set_link(link: &str, up: bool) -> Action {
    Action::SetLink { link: link.into(), up }
}

fn set_route(node: NodeId, dest: NodeId, next_hop: NodeId, link: Option<&str>) -> Action {
    Action::SetRoute {
        node,
        dest,
        next_hop,
        link: link.map(str::to_string),
    }
}

fn link_up(link: &str) -> Expect {
    Expect::LinkUp { link: link.into() }
}

fn telemetry(node: NodeId) -> TrafficConfig {
    TrafficConfig {
        node,
        kind: crate::dtn::DEFAULT_DATUM_KIND.into(),
        content: Content::Telemetry,
        size_bytes: crate::sim::config::TELEMETRY_LEN,
        start_ms: 0,
        period_ms: SECOND,
        stop_ms: None,
        count: None,
        priority: Priority::Normal,
        label: Some(TELEMETRY_LABEL.into()),
    }
}

// ---- bench

/// Vehicle, satellite and workstation on lossless, always-on links.
pub fn build_workbench() -> ScenarioConfig {
    build_workbench_with_loss(0.0)
}

/// The bench setup with `loss` on the radio link. At 1.0 nothing arrives,
/// so the reconstruction and accounting checks are expected to fail.
pub fn build_workbench_with_loss(loss: f64) -> ScenarioConfig {
    let total = loss >= 1.0;
    let mut sc = satcomms(None);
    sc.gate_on_visibility = false;
    let mut sat = node(SATELLITE, NodeKind::Satellite, "satellite");
    sat.routes.push(route(WORKSTATION, WORKSTATION));
    let mut radio = link("sdr", VEHICLE, SATELLITE, Medium::Radio);
    radio.per_copy_loss = (loss > 0.0).then_some(loss);

    let expected = if total { Outcome::Fail } else { Outcome::Pass };
    let mut script = vec![
        step(
            "enqueue bench datum",
            "bench",
            1,
            vec![Action::Enqueue {
                node: VEHICLE,
                kind: crate::dtn::DEFAULT_DATUM_KIND.into(),
                size_bytes: crate::sim::config::TELEMETRY_LEN,
                content: Content::Pattern,
                priority: Priority::Normal,
                label: Some(BENCH_LABEL.into()),
            }],
            Expect::SatCommsArmed {
                node: VEHICLE,
                transmit: Some(true),
                ephemeris: None,
            },
        ),
        step(
            "fragments transmitted",
            "bench",
            10,
            vec![],
            Expect::Transmitting {
                node: VEHICLE,
                min_frames: 2,
            },
        ),
        step(
            "datum reconstructed",
            "bench",
            20,
            vec![],
            Expect::DatumDelivered {
                label: BENCH_LABEL.into(),
            },
        ),
        step(
            "duplicates discarded",
            "bench",
            20,
            vec![],
            Expect::RedundancyAccounting {
                sender: VEHICLE,
                receiver: WORKSTATION,
            },
        ),
    ];
    for s in &mut script[2..] {
        s.expected = expected;
    }
    for s in &mut script {
        s.extension = true;
    }

    ScenarioConfig {
        name: if loss > 0.0 { "workbench_loss".into() } else { "workbench".into() },
        description: "SatComms on the bench: fragmentation, redundant copies and reassembly without pass gating".into(),
        seed: DEFAULT_SEED,
        duration_ms: 30 * SECOND,
        tick_ms: crate::sim::config::DEFAULT_TICK_MS,
        housekeeping_ms: crate::sim::config::DEFAULT_HOUSEKEEPING_MS,
        hop_latency_ms: crate::sim::config::DEFAULT_HOP_LATENCY_MS,
        eviction_age_ms: None,
        frame_bytes: None,
        uplink_scheduler: None,
        radio_profiles: BTreeMap::new(),
        airframe: Default::default(),
        nodes: vec![
            vehicle(VEHICLE, "x8-testbed", [0.0; 3], sc),
            sat,
            node(WORKSTATION, NodeKind::Workstation, "workstation"),
        ],
        ephemerides: vec![],
        links: vec![radio, link("lan", SATELLITE, WORKSTATION, Medium::Wired)],
        traffic: vec![],
        script,
    }
}

// ---- ground network shared by the dry run and field trial

fn ground_network(sat_active: bool, satellite_pass: OrbitEphemeris) -> (Vec<NodeConfig>, Vec<LinkConfig>) {
    let mut sat = node(SATELLITE, NodeKind::Satellite, "satellite-simulator");
    sat.active = sat_active;
    sat.position = Some([800.0, 0.0, 0.0]);
    let nodes = vec![
        sat,
        node(GATEWAY_A, NodeKind::Gateway, "gateway-a"),
        node(SERVER, NodeKind::Server, "server"),
        node(GATEWAY_B, NodeKind::Gateway, "gateway-b"),
        node(WORKSTATION, NodeKind::Workstation, "workstation"),
    ];
    let mut sdr = link("sdr", VEHICLE, SATELLITE, Medium::Radio);
    sdr.gate = Some(satellite_pass.satellite_id);
    let down = |mut l: LinkConfig| {
        l.up = false;
        l
    };
    let links = vec![
        sdr,
        down(link("eth0", SATELLITE, GATEWAY_A, Medium::Wired)),
        down(link("3g_a", GATEWAY_A, SERVER, Medium::Wired)),
        down(link("3g_b", SERVER, GATEWAY_B, Medium::Wired)),
        link("lan_b", GATEWAY_B, WORKSTATION, Medium::Wired),
        // the server port nothing listens on
        down(link("bad_port", SERVER, GATEWAY_B, Medium::Wired)),
    ];
    (nodes, links)
}

/// Steps that bring the ground network up. The server route is pinned to
/// `server_link`; `None` leaves the server without a route.
fn setup_steps(row: impl Fn(usize) -> String, server_link: Option<&str>) -> Vec<ScriptStep> {
    let server_route = match server_link {
        Some(l) => vec![set_route(SERVER, WORKSTATION, GATEWAY_B, Some(l))],
        None => vec![],
    };
    vec![
        step(
            "configure simulator network interface",
            &row(1),
            10,
            vec![set_link("eth0", true)],
            link_up("eth0"),
        ),
        step(
            "configure simulator connections",
            &row(2),
            20,
            vec![
                set_route(SATELLITE, WORKSTATION, GATEWAY_A, None),
                set_route(GATEWAY_A, WORKSTATION, SERVER, None),
            ],
            Expect::All {
                checks: vec![
                    Expect::RouteConfigured {
                        node: SATELLITE,
                        dest: WORKSTATION,
                    },
                    Expect::RouteConfigured {
                        node: GATEWAY_A,
                        dest: WORKSTATION,
                    },
                ],
            },
        ),
        step(
            "connect gateways",
            &row(3),
            30,
            vec![set_link("3g_a", true), set_link("3g_b", true)],
            Expect::All {
                checks: vec![link_up("3g_a"), link_up("3g_b")],
            },
        ),
        step(
            "route incoming traffic at client gateway",
            &row(4),
            40,
            vec![set_route(GATEWAY_B, WORKSTATION, WORKSTATION, None)],
            Expect::RouteConfigured {
                node: GATEWAY_B,
                dest: WORKSTATION,
            },
        ),
        step(
            "route incoming traffic at server",
            &row(5),
            50,
            server_route,
            Expect::RouteConfigured {
                node: SERVER,
                dest: WORKSTATION,
            },
        ),
    ]
}

// ---- dry run

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DryRunVariant {
    /// The server first routes to a dead port and is fixed on the retry.
    #[default]
    Nominal,
    /// The dead-port route is never fixed.
    Misroute,
    /// The server never gets a route; frames pile up there.
    NoServerRoute,
}

/// Testbed vehicle and the full ground chain, stepped through the dry-run
/// checklist.
pub fn build_dry_run() -> ScenarioConfig {
    build_dry_run_variant(DryRunVariant::Nominal)
}

pub fn build_dry_run_variant(variant: DryRunVariant) -> ScenarioConfig {
    let eph = OrbitEphemeris {
        satellite_id: SATELLITE,
        last_passage: 120 * SECOND,
        period: 1_200 * SECOND,
        window: 300 * SECOND,
    };
    let (mut nodes, links) = ground_network(false, eph);
    let mut sc = satcomms(None);
    sc.transmit_when_possible = false;
    let mut v = vehicle(VEHICLE, "x8-testbed", [0.0; 3], sc);
    v.active = false;
    nodes.insert(0, v);

    let row = |i: usize| format!("dry-run {i}");
    let server_link = match variant {
        DryRunVariant::NoServerRoute => None,
        _ => Some("bad_port"),
    };
    let mut script = setup_steps(row, server_link);
    let mut start_sim = step(
        "start simulator",
        &row(7),
        70,
        vec![Action::PowerUp { node: SATELLITE }],
        Expect::PathReachable {
            from: SATELLITE,
            dest: WORKSTATION,
        },
    );
    if variant == DryRunVariant::Nominal {
        start_sim.retry = vec![set_route(SERVER, WORKSTATION, GATEWAY_B, Some("3g_b"))];
    }
    let mut start_tx = step(
        "start transmission",
        &row(9),
        100,
        vec![Action::SetTransmit {
            node: VEHICLE,
            enabled: true,
        }],
        Expect::All {
            checks: vec![
                Expect::SatCommsArmed {
                    node: VEHICLE,
                    transmit: Some(true),
                    ephemeris: Some(true),
                },
                Expect::Transmitting {
                    node: VEHICLE,
                    min_frames: 1,
                },
            ],
        },
    );
    start_tx.check_at_ms = Some(125 * SECOND);
    script.extend([
        step(
            "testbed power up",
            &row(6),
            60,
            vec![Action::PowerUp { node: VEHICLE }],
            Expect::All {
                checks: vec![
                    Expect::NodeActive { node: VEHICLE },
                    Expect::SatCommsArmed {
                        node: VEHICLE,
                        transmit: Some(false),
                        ephemeris: None,
                    },
                ],
            },
        ),
        start_sim,
        step(
            "configure satellite",
            &row(8),
            80,
            vec![Action::ConfigureSatellite {
                node: VEHICLE,
                ephemeris: SATELLITE,
            }],
            Expect::SatCommsArmed {
                node: VEHICLE,
                transmit: Some(false),
                ephemeris: Some(true),
            },
        ),
        start_tx,
        step(
            "check transmission",
            &row(10),
            130,
            vec![],
            Expect::Transmitting {
                node: VEHICLE,
                min_frames: 2,
            },
        ),
        step(
            "check simulator reception",
            &row(11),
            140,
            vec![],
            Expect::Received {
                node: SATELLITE,
                min_frames: 1,
            },
        ),
        step(
            "check workstation reception",
            &row(12),
            150,
            vec![],
            Expect::Received {
                node: WORKSTATION,
                min_frames: 1,
            },
        ),
        step(
            "check message reconstruction",
            &row(13),
            160,
            vec![],
            Expect::DatumDelivered {
                label: TELEMETRY_LABEL.into(),
            },
        ),
    ]);
    let failing: &[usize] = match variant {
        DryRunVariant::Nominal => &[],
        DryRunVariant::Misroute => &[7, 12, 13],
        DryRunVariant::NoServerRoute => &[5, 7, 12, 13],
    };
    for s in &mut script {
        if failing.iter().any(|i| s.row == row(*i)) {
            s.expected = Outcome::Fail;
        }
    }

    let name = match variant {
        DryRunVariant::Nominal => "dry_run",
        DryRunVariant::Misroute => "dry_run_misroute",
        DryRunVariant::NoServerRoute => "dry_run_no_server_route",
    };
    ScenarioConfig {
        name: name.into(),
        description: "Ground-chain rehearsal with a testbed vehicle and a satellite simulator".into(),
        seed: DEFAULT_SEED,
        duration_ms: 500 * SECOND,
        tick_ms: crate::sim::config::DEFAULT_TICK_MS,
        housekeeping_ms: crate::sim::config::DEFAULT_HOUSEKEEPING_MS,
        hop_latency_ms: crate::sim::config::DEFAULT_HOP_LATENCY_MS,
        eviction_age_ms: None,
        frame_bytes: None,
        uplink_scheduler: None,
        radio_profiles: BTreeMap::new(),
        airframe: Default::default(),
        nodes,
        ephemerides: vec![eph],
        links,
        traffic: vec![telemetry(VEHICLE)],
        script,
    }
}

// ---- field trial

#[derive(Clone, Debug, PartialEq)]
pub struct FieldTrialParams {
    /// Radio link outage in the middle of the first pass.
    pub wind_outage: bool,
    /// Ground range the SDR check accepts.
    pub sdr_range_m: f64,
    pub survey_plan: Vec<[f64; 3]>,
}

impl Default for FieldTrialParams {
    fn default() -> Self {
        FieldTrialParams {
            wind_outage: false,
            sdr_range_m: 1_000.0,
            survey_plan: lawnmower(),
        }
    }
}

/// Three survey legs at 100 m ending at a loiter point off the area.
pub fn lawnmower() -> Vec<[f64; 3]> {
    vec![
        [200.0, 0.0, 100.0],
        [1_000.0, 0.0, 100.0],
        [1_000.0, 150.0, 100.0],
        [200.0, 150.0, 100.0],
        [200.0, 300.0, 100.0],
        [1_000.0, 300.0, 100.0],
        [600.0, 600.0, 100.0],
    ]
}

/// First pass opens here in the field trial.
pub const FIELD_PASS_1_MS: Millis = 600 * SECOND;
pub const FIELD_PASS_2_MS: Millis = 1_800 * SECOND;

pub fn build_field_trial(wind_outage: bool) -> ScenarioConfig {
    build_field_trial_with(&FieldTrialParams {
        wind_outage,
        ..Default::default()
    })
}

pub fn build_field_trial_with(p: &FieldTrialParams) -> ScenarioConfig {
    let eph = OrbitEphemeris {
        satellite_id: SATELLITE,
        last_passage: FIELD_PASS_1_MS,
        period: FIELD_PASS_2_MS - FIELD_PASS_1_MS,
        window: 300 * SECOND,
    };
    let (mut nodes, mut links) = ground_network(true, eph);
    if p.wind_outage {
        links[0].schedule = vec![
            LinkChange {
                at_ms: 660 * SECOND,
                up: false,
            },
            LinkChange {
                at_ms: 960 * SECOND,
                up: true,
            },
        ];
    }
    let mut sc = satcomms(None);
    sc.transmit_when_possible = false;
    sc.resend = Some(ResendPolicy {
        after_ms: 600 * SECOND,
        max_attempts: 1,
    });
    let mut uav = vehicle(VEHICLE, "x8", [0.0; 3], sc);
    uav.active = false;
    uav.motion = Some(MotionSpec {
        speed_mps: None,
        waypoints: vec![],
        airborne: false,
        executing: false,
        battery_j: None,
    });
    nodes.insert(0, uav);

    let row = |phase: &str, i: usize| format!("field {phase} {i}");
    let mut script = setup_steps(|i| row("setup", i), Some("3g_b"));
    script[4].expect = Expect::All {
        checks: vec![
            Expect::RouteConfigured {
                node: SERVER,
                dest: WORKSTATION,
            },
            Expect::PathReachable {
                from: SATELLITE,
                dest: WORKSTATION,
            },
        ],
    };
    let mut start_tx = step(
        "start transmission",
        &row("flight", 12),
        150,
        vec![Action::SetTransmit {
            node: VEHICLE,
            enabled: true,
        }],
        Expect::SatCommsArmed {
            node: VEHICLE,
            transmit: Some(true),
            ephemeris: Some(true),
        },
    );
    start_tx.check_at_ms = Some(151 * SECOND);
    let mut reconstruction = step(
        "check message reconstruction",
        &row("flight", 17),
        700,
        vec![],
        Expect::DatumDelivered {
            label: SURVEY_LABEL.into(),
        },
    );
    if p.wind_outage {
        reconstruction.expected = Outcome::Fail;
    }
    let mut pass_bytes = step(
        "raw bytes sent over the first pass",
        "pass capacity",
        901,
        vec![],
        Expect::PassRawBytes {
            satellite: SATELLITE,
            window_start_ms: FIELD_PASS_1_MS,
            expected: 45_000,
            tolerance: 256,
        },
    );
    pass_bytes.extension = true;
    let mut recovered = step(
        "survey reconstructed by the next pass",
        "store and forward",
        2_105,
        vec![],
        Expect::DatumDelivered {
            label: SURVEY_LABEL.into(),
        },
    );
    recovered.extension = true;

    script.extend([
        step(
            "power up vehicle",
            &row("pre-flight", 6),
            60,
            vec![Action::PowerUp { node: VEHICLE }],
            Expect::NodeActive { node: VEHICLE },
        ),
        step(
            "check SDR communication",
            &row("pre-flight", 7),
            70,
            vec![],
            Expect::SatCommsArmed {
                node: VEHICLE,
                transmit: None,
                ephemeris: None,
            },
        ),
        step(
            "check SDR range",
            &row("pre-flight", 8),
            80,
            vec![],
            Expect::All {
                checks: vec![
                    link_up("sdr"),
                    Expect::InRange {
                        a: VEHICLE,
                        b: SATELLITE,
                        max_m: p.sdr_range_m,
                    },
                ],
            },
        ),
        step(
            "takeoff",
            &row("pre-flight", 9),
            100,
            vec![Action::Takeoff { node: VEHICLE }],
            Expect::Airborne {
                node: VEHICLE,
                airborne: true,
            },
        ),
        step(
            "upload survey plan",
            &row("flight", 10),
            120,
            vec![Action::UploadPlan {
                node: VEHICLE,
                waypoints: p.survey_plan.clone(),
            }],
            Expect::PlanLoaded { node: VEHICLE },
        ),
        step(
            "configure satellite",
            &row("flight", 11),
            140,
            vec![Action::ConfigureSatellite {
                node: VEHICLE,
                ephemeris: SATELLITE,
            }],
            Expect::SatCommsArmed {
                node: VEHICLE,
                transmit: Some(false),
                ephemeris: Some(true),
            },
        ),
        start_tx,
        step(
            "execute survey plan",
            &row("flight", 13),
            180,
            vec![Action::StartPlan { node: VEHICLE }],
            Expect::PlanExecuting { node: VEHICLE },
        ),
        step(
            "check transmission",
            &row("flight", 14),
            610,
            vec![],
            Expect::Transmitting {
                node: VEHICLE,
                min_frames: 1,
            },
        ),
        step(
            "check simulator reception",
            &row("flight", 15),
            620,
            vec![],
            Expect::Received {
                node: SATELLITE,
                min_frames: 1,
            },
        ),
        step(
            "check workstation reception",
            &row("flight", 16),
            630,
            vec![],
            Expect::Received {
                node: WORKSTATION,
                min_frames: 1,
            },
        ),
        reconstruction,
        step(
            "loiter until the window closes",
            &row("flight", 18),
            850,
            vec![],
            Expect::LoiterTransmitting { node: VEHICLE },
        ),
        pass_bytes,
        recovered,
        step(
            "land",
            &row("flight", 19),
            2_200,
            vec![Action::Land { node: VEHICLE }],
            Expect::Landed { node: VEHICLE },
        ),
    ]);

    let survey = TrafficConfig {
        content: Content::Pattern,
        size_bytes: 2_600,
        start_ms: FIELD_PASS_1_MS - 10 * SECOND,
        count: Some(1),
        priority: Priority::High,
        label: Some(SURVEY_LABEL.into()),
        ..telemetry(VEHICLE)
    };
    ScenarioConfig {
        name: if p.wind_outage { "field_trial_wind".into() } else { "field_trial".into() },
        description: "Survey flight relaying telemetry and a survey product through one 300 s pass".into(),
        seed: DEFAULT_SEED,
        duration_ms: 2_300 * SECOND,
        tick_ms: crate::sim::config::DEFAULT_TICK_MS,
        housekeeping_ms: crate::sim::config::DEFAULT_HOUSEKEEPING_MS,
        hop_latency_ms: crate::sim::config::DEFAULT_HOP_LATENCY_MS,
        eviction_age_ms: None,
        frame_bytes: None,
        uplink_scheduler: None,
        radio_profiles: BTreeMap::new(),
        airframe: Default::default(),
        nodes,
        ephemerides: vec![eph],
        links,
        traffic: vec![telemetry(VEHICLE), survey],
        script,
    }
}

// ---- multi-vehicle

/// Bytes each vehicle contributes to the shared image.
pub const IMAGE_PART_BYTES: usize = 6_000;
pub const FLEET_PASS_MS: Millis = 60 * SECOND;

/// Windows of length `window` needed to uplink `n` image parts.
fn windows_needed(n: usize, window: Millis) -> Millis {
    let humsat = &crate::linkmodel::builtin_profiles()[HUMSAT];
    let fragments = n * IMAGE_PART_BYTES.div_ceil(humsat.payload_capacity() as usize);
    let per_window = (window / humsat.fragment_airtime()) as usize;
    fragments.div_ceil(per_window) as Millis
}

pub fn fleet_ids(n: usize) -> Vec<NodeId> {
    (0..n).map(|i| NodeId(FIRST_FLEET_ID + i as u8)).collect()
}

fn fleet_base(name: String, duration_ms: Millis) -> ScenarioConfig {
    let mut sat = node(SATELLITE, NodeKind::Satellite, "satellite");
    sat.routes.push(route(WORKSTATION, GATEWAY_A));
    let mut gw = node(GATEWAY_A, NodeKind::Gateway, "gateway");
    gw.routes.push(route(WORKSTATION, WORKSTATION));
    ScenarioConfig {
        name,
        description: String::new(),
        seed: DEFAULT_SEED,
        duration_ms,
        tick_ms: crate::sim::config::DEFAULT_TICK_MS,
        housekeeping_ms: crate::sim::config::DEFAULT_HOUSEKEEPING_MS,
        hop_latency_ms: crate::sim::config::DEFAULT_HOP_LATENCY_MS,
        // parts stay partial across several passes
        eviction_age_ms: Some(duration_ms + 1),
        frame_bytes: None,
        uplink_scheduler: Some("proportional".into()),
        radio_profiles: BTreeMap::new(),
        airframe: Default::default(),
        nodes: vec![sat, gw, node(WORKSTATION, NodeKind::Workstation, "workstation")],
        ephemerides: vec![OrbitEphemeris {
            satellite_id: SATELLITE,
            last_passage: FLEET_PASS_MS,
            period: 1_200 * SECOND,
            window: 300 * SECOND,
        }],
        links: vec![
            link("eth0", SATELLITE, GATEWAY_A, Medium::Wired),
            link("lan", GATEWAY_A, WORKSTATION, Medium::Wired),
        ],
        traffic: vec![],
        script: vec![],
    }
}

fn add_senders(cfg: &mut ScenarioConfig, senders: &[NodeId], tracked: NodeId) {
    for (i, &v) in senders.iter().enumerate() {
        cfg.nodes.push(vehicle(
            v,
            &format!("x8-{}", v.0),
            [100.0 * i as f64, 0.0, 0.0],
            satcomms(Some(tracked)),
        ));
        let mut l = link(&format!("sdr_{}", v.0), v, tracked, Medium::Radio);
        l.gate = Some(tracked);
        cfg.links.push(l);
        cfg.traffic.push(TrafficConfig {
            content: Content::Pattern,
            size_bytes: IMAGE_PART_BYTES,
            count: Some(1),
            label: Some(image_part_label(i)),
            ..telemetry(v)
        });
    }
    let mut checks = vec![Expect::SlotsDisjoint];
    checks.extend((0..senders.len()).map(|i| Expect::DatumDelivered {
        label: image_part_label(i),
    }));
    let mut s = step("image reassembled from all parts", "fleet", cfg.duration_ms / SECOND, vec![], Expect::All {
        checks,
    });
    s.extension = true;
    cfg.script.push(s);
}

/// `n` vehicles each holding one part of an image, sharing the satellite
/// under proportional slots.
pub fn build_multi_vehicle(n: usize) -> Result<ScenarioConfig, ConfigError> {
    if n == 0 {
        return Err(ConfigError::new("n", "need at least one vehicle"));
    }
    if n > 32 {
        return Err(ConfigError::new("n", "at most 32 vehicles"));
    }
    let passes = windows_needed(n, 300 * SECOND);
    let mut cfg = fleet_base(format!("multi_vehicle_{n}"), FLEET_PASS_MS + passes * 1_200 * SECOND);
    cfg.description = format!("{n} vehicles share one satellite uplink under slot scheduling");
    add_senders(&mut cfg, &fleet_ids(n), SATELLITE);
    Ok(cfg)
}

pub const RELAY_LINK: &str = "relay_uplink";
pub const RELAY_LINK_UP_MS: Millis = 900 * SECOND;

/// `n` vehicles with the satellite switched off. The last vehicle emulates
/// it: the others see it on a short periodic window, and it keeps their
/// frames until its own side link to the gateway comes up.
pub fn build_multi_vehicle_relay(n: usize) -> Result<ScenarioConfig, ConfigError> {
    if n < 2 {
        return Err(ConfigError::new("n", "a relay needs at least one other vehicle"));
    }
    if n > 32 {
        return Err(ConfigError::new("n", "at most 32 vehicles"));
    }
    let ids = fleet_ids(n);
    let relay = *ids.last().expect("n >= 2");
    let senders = &ids[..n - 1];
    let windows = windows_needed(n - 1, 120 * SECOND);
    let end = (FLEET_PASS_MS + windows * 600 * SECOND).max(RELAY_LINK_UP_MS + 600 * SECOND);
    let mut cfg = fleet_base(format!("multi_vehicle_relay_{n}"), end);
    cfg.description = format!("{} vehicles reach the workstation through a relay vehicle", n - 1);
    cfg.nodes[0].active = false;
    let mut r = node(relay, NodeKind::Vehicle, &format!("x8-{}-relay", relay.0));
    r.position = Some([0.0, 500.0, 0.0]);
    r.routes.push(route(WORKSTATION, GATEWAY_A));
    cfg.nodes.push(r);
    cfg.ephemerides.push(OrbitEphemeris {
        satellite_id: relay,
        last_passage: FLEET_PASS_MS,
        period: 600 * SECOND,
        window: 120 * SECOND,
    });
    let mut side = link(RELAY_LINK, relay, GATEWAY_A, Medium::Wired);
    side.up = false;
    side.schedule = vec![LinkChange {
        at_ms: RELAY_LINK_UP_MS,
        up: true,
    }];
    cfg.links.push(side);
    add_senders(&mut cfg, senders, relay);
    Ok(cfg)
}

// ---- registry

/// A scenario that can be built by name.
pub trait CannedScenario: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self) -> ScenarioConfig;
}

struct Builtin {
    name: &'static str,
    description: &'static str,
    build: fn() -> ScenarioConfig,
}

impl CannedScenario for Builtin {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        self.description
    }

    fn build(&self) -> ScenarioConfig {
        (self.build)()
    }
}

pub struct ScenarioRegistry {
    scenarios: BTreeMap<&'static str, Box<dyn CannedScenario>>,
}

impl ScenarioRegistry {
    pub fn empty() -> Self {
        ScenarioRegistry {
            scenarios: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        let builtins: [(&'static str, &'static str, fn() -> ScenarioConfig); 12] = [
            ("workbench", "bench test, lossless", build_workbench),
            ("workbench_loss", "bench test with every copy lost", || build_workbench_with_loss(1.0)),
            ("dry_run", "dry-run checklist with the misroute fixed on retry", build_dry_run),
            ("dry_run_misroute", "dry run where the misroute is never fixed", || {
                build_dry_run_variant(DryRunVariant::Misroute)
            }),
            ("dry_run_no_server_route", "dry run without a server route", || {
                build_dry_run_variant(DryRunVariant::NoServerRoute)
            }),
            ("field_trial", "field mission, clean pass", || build_field_trial(false)),
            ("field_trial_wind", "field mission with a mid-pass outage", || build_field_trial(true)),
            ("multi_vehicle_1", "one vehicle under the slot scheduler", || fleet(1)),
            ("multi_vehicle_2", "two vehicles sharing a pass", || fleet(2)),
            ("multi_vehicle_3", "three vehicles sharing a pass", || fleet(3)),
            ("multi_vehicle_4", "four vehicles sharing a pass", || fleet(4)),
            ("multi_vehicle_relay_4", "three vehicles through a relay vehicle", || {
                build_multi_vehicle_relay(4).expect("valid count")
            }),
        ];
        for (name, description, build) in builtins {
            r.register(Box::new(Builtin {
                name,
                description,
                build,
            }));
        }
        r
    }

    pub fn register(&mut self, s: Box<dyn CannedScenario>) {
        self.scenarios.insert(s.name(), s);
    }

    pub fn get(&self, name: &str) -> Option<&dyn CannedScenario> {
        self.scenarios.get(name).map(|b| b.as_ref())
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn CannedScenario> {
        self.scenarios.values().map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.scenarios.keys().copied()
    }
}

impl Default for ScenarioRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn fleet(n: usize) -> ScenarioConfig {
    build_multi_vehicle(n).expect("valid count")
}
