//! Store-and-forward node state machines.
//!
//! Nodes never touch each other directly: the simulator moves [`Packet`]s
//! between them and asks each node what to do with what it receives.

mod node;
mod queue;
mod routing;
mod satcomms;
mod scheduler;

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::{Millis, NodeId};

pub use node::{ForwardStore, LinkView, Node, ReceiveEffect, StoreReason, StoredPacket};
pub use queue::{QueueEntry, QueueError, StoreQueue};
pub use routing::{check_routes, route_next_hop, RouteEntry, RouteError, RouteLookup, RoutingTable, Routes};
pub use satcomms::{
    EnqueueError, Enqueued, ResendPolicy, SatComms, SatCommsConfig, SlotGate, Transmission, TxCopy,
    DEFAULT_DATUM_KIND,
};
pub use scheduler::{
    schedule_multi_vehicle, EqualShareScheduler, ProportionalScheduler, SchedulerRegistry, SlotAssignment,
    UplinkScheduler, VehicleDemand,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Vehicle,
    Satellite,
    Gateway,
    Server,
    Workstation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    High,
    #[default]
    Normal,
}

/// Stable identifier of a datum: originating node plus a per-node sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct DatumId {
    pub node: NodeId,
    pub seq: u32,
}

impl fmt::Display for DatumId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.node, self.seq)
    }
}

/// Identifies the pass a transmission was made in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
pub struct PassTag {
    pub satellite: NodeId,
    pub window_start: Millis,
}

/// Network envelope around one wire frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Packet {
    pub dest: NodeId,
    pub origin: NodeId,
    pub wire: Vec<u8>,
    /// Start of the original over-the-air copy.
    pub sent_at: Millis,
    pub pass: Option<PassTag>,
}

/// Why a datum left the system without being delivered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    KindFiltered,
    QueueFull,
    TooLarge,
    /// Every surviving copy was lost to random channel loss.
    ChannelLoss,
    /// Copies in flight when a link went down.
    LinkOutage,
    NodeInactive,
    DecodeError,
    /// Held by a relay with no route until the eviction age.
    NoRoute,
    /// Held by a relay waiting for a link until the eviction age.
    StoreExpired,
    ReassemblyEvicted,
    Conflict,
}
