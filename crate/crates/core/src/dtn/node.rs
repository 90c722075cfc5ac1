use std::collections::VecDeque;

use super::{NodeKind, Packet, RoutingTable, SatComms};
use crate::fragproto::{decode_frame, FragError, Fragment, IngestOutcome, ReassemblyStore};
use crate::{Millis, NodeId};

/// What a node can see of its links at the current instant.
pub trait LinkView {
    /// Index of a link from `from` to `to` that can carry a frame right now.
    /// `pinned` restricts the choice to one named link.
    fn usable_link(&self, from: NodeId, to: NodeId, pinned: Option<&str>) -> Option<usize>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreReason {
    NoRoute,
    LinkDown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredPacket {
    pub packet: Packet,
    pub stored_at: Millis,
    pub reason: StoreReason,
}

/// Frames held by a relay until a route and an open link exist.
pub type ForwardStore = VecDeque<StoredPacket>;

#[derive(Clone, Debug, PartialEq)]
pub enum ReceiveEffect {
    /// The node is switched off; the frame is lost.
    Inactive,
    DecodeError(FragError),
    /// Addressed to this node and handed to reassembly.
    Reassembled { fragment: Fragment, outcome: IngestOutcome },
    Forward { fragment: Fragment, next_hop: NodeId, link: usize, packet: Packet },
    Stored { fragment: Fragment, reason: StoreReason },
}

/// One network node. Vehicles carry a SatComms task; any node whose id is a
/// packet's destination reassembles it; every other node decodes and
/// forwards, storing while the next hop is unreachable.
#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    pub active: bool,
    pub frame_bytes: usize,
    pub routes: RoutingTable,
    pub store: ForwardStore,
    pub reassembly: ReassemblyStore,
    pub satcomms: Option<SatComms>,
}

impl Node {
    pub fn new(id: NodeId, kind: NodeKind, name: impl Into<String>, frame_bytes: usize) -> Self {
        Node {
            id,
            kind,
            name: name.into(),
            active: true,
            frame_bytes,
            routes: RoutingTable::default(),
            store: ForwardStore::new(),
            reassembly: ReassemblyStore::new(),
            satcomms: None,
        }
    }

    pub fn on_receive(&mut self, packet: Packet, now: Millis, links: &dyn LinkView) -> ReceiveEffect {
        if !self.active {
            return ReceiveEffect::Inactive;
        }
        let fragment = match decode_frame(&packet.wire, self.frame_bytes) {
            Ok(f) => f,
            Err(e) => return ReceiveEffect::DecodeError(e),
        };
        if packet.dest == self.id {
            let outcome = self.reassembly.ingest(&fragment, now);
            return ReceiveEffect::Reassembled { fragment, outcome };
        }
        match self.next_hop(&packet, links) {
            Ok((next_hop, link)) => ReceiveEffect::Forward {
                fragment,
                next_hop,
                link,
                packet,
            },
            Err(reason) => {
                self.store.push_back(StoredPacket {
                    packet,
                    stored_at: now,
                    reason,
                });
                ReceiveEffect::Stored { fragment, reason }
            }
        }
    }

    fn next_hop(&self, packet: &Packet, links: &dyn LinkView) -> Result<(NodeId, usize), StoreReason> {
        let entry = self.routes.lookup(packet.dest).ok_or(StoreReason::NoRoute)?;
        let link = links
            .usable_link(self.id, entry.next_hop, entry.link.as_deref())
            .ok_or(StoreReason::LinkDown)?;
        Ok((entry.next_hop, link))
    }

    /// Removes every stored packet that can now be forwarded, in store order.
    pub fn drain_store(&mut self, links: &dyn LinkView) -> Vec<(StoredPacket, NodeId, usize)> {
        if !self.active {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut keep = ForwardStore::new();
        while let Some(mut sp) = self.store.pop_front() {
            match self.next_hop(&sp.packet, links) {
                Ok((hop, link)) => out.push((sp, hop, link)),
                Err(reason) => {
                    sp.reason = reason;
                    keep.push_back(sp);
                }
            }
        }
        self.store = keep;
        out
    }

    /// Drops stored packets older than `max_age`.
    pub fn expire_store(&mut self, now: Millis, max_age: Millis) -> Vec<StoredPacket> {
        let (expired, keep): (ForwardStore, ForwardStore) =
            self.store.drain(..).partition(|sp| now - sp.stored_at > max_age);
        self.store = keep;
        expired.into_iter().collect()
    }
}
