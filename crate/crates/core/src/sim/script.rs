//! Scripted operator steps and the checks made after each one.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::config::Content;
use crate::dtn::Priority;
use crate::{Millis, NodeId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    #[default]
    Pass,
    Fail,
}

impl Outcome {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub name: String,
    /// Operational phase or table row the step reproduces.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub row: String,
    pub at_ms: Millis,
    /// Evaluate the check later than the actions; immediately when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_at_ms: Option<Millis>,
    #[serde(default)]
    pub actions: Vec<Action>,
    pub expect: Expect,
    /// The outcome the check should produce; a step passes when the observed
    /// outcome matches it.
    #[serde(default)]
    pub expected: Outcome,
    /// Applied once, then the check is repeated, if the first check fails.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retry: Vec<Action>,
    /// Not part of the original test tables.
    #[serde(default)]
    pub extension: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SetLink {
        link: String,
        up: bool,
    },
    SetRoute {
        node: NodeId,
        dest: NodeId,
        next_hop: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        link: Option<String>,
    },
    RemoveRoute {
        node: NodeId,
        dest: NodeId,
    },
    PowerUp {
        node: NodeId,
    },
    PowerDown {
        node: NodeId,
    },
    Takeoff {
        node: NodeId,
    },
    Land {
        node: NodeId,
    },
    UploadPlan {
        node: NodeId,
        waypoints: Vec<[f64; 3]>,
    },
    StartPlan {
        node: NodeId,
    },
    /// Points the SatComms task at a satellite's ephemeris.
    ConfigureSatellite {
        node: NodeId,
        ephemeris: NodeId,
    },
    SetTransmit {
        node: NodeId,
        enabled: bool,
    },
    Enqueue {
        node: NodeId,
        #[serde(default = "super::config::default_kind")]
        kind: String,
        size_bytes: usize,
        #[serde(default)]
        content: Content,
        #[serde(default)]
        priority: Priority,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "check", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expect {
    Always,
    LinkUp {
        link: String,
    },
    RouteConfigured {
        node: NodeId,
        dest: NodeId,
    },
    /// Routes lead hop by hop to `dest` over links that are up, ignoring
    /// pass visibility.
    PathReachable {
        from: NodeId,
        dest: NodeId,
    },
    NodeActive {
        node: NodeId,
    },
    SatCommsArmed {
        node: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        transmit: Option<bool>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ephemeris: Option<bool>,
    },
    Transmitting {
        node: NodeId,
        min_frames: u64,
    },
    Received {
        node: NodeId,
        min_frames: u64,
    },
    /// A datum with this label was reassembled byte-exactly.
    DatumDelivered {
        label: String,
    },
    DeliveredFrom {
        node: NodeId,
        min: u64,
    },
    InRange {
        a: NodeId,
        b: NodeId,
        max_m: f64,
    },
    Airborne {
        node: NodeId,
        airborne: bool,
    },
    PlanLoaded {
        node: NodeId,
    },
    PlanExecuting {
        node: NodeId,
    },
    /// Holding at the last waypoint and transmitted within the last 5 s.
    LoiterTransmitting {
        node: NodeId,
    },
    Landed {
        node: NodeId,
    },
    /// Raw channel bytes (copies included) sent in one pass.
    PassRawBytes {
        satellite: NodeId,
        window_start_ms: Millis,
        expected: u64,
        tolerance: u64,
    },
    /// copies == redundancy x frames at the sender and duplicates ==
    /// (redundancy - 1) x distinct frames at the receiver.
    RedundancyAccounting {
        sender: NodeId,
        receiver: NodeId,
    },
    /// Every logged slot assignment is disjoint and inside its window.
    SlotsDisjoint,
    All {
        checks: Vec<Expect>,
    },
}
