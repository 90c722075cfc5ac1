//! Per-datum conservation bookkeeping.
//!
//! Each datum tracks where pieces of it still exist: fragments waiting in the
//! sender queue, frame copies in flight or held by relays, partial buffers at
//! receivers and a pending resend. A datum is dropped, with the reason of its
//! last loss, once none of these remain and it was never delivered.

use std::collections::{BTreeMap, BTreeSet};

use crate::dtn::{DatumId, DropReason, Priority};
use crate::fragproto::ReassemblyKey;
use crate::{Millis, NodeId};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatumState {
    Live,
    Delivered,
    Dropped(DropReason),
}

#[derive(Clone, Debug)]
pub struct DatumEntry {
    pub kind: String,
    pub label: Option<String>,
    pub priority: Priority,
    pub data: Vec<u8>,
    pub enqueued_at: Millis,
    pub resends: u32,
    pub state: DatumState,
    in_queue: u64,
    in_network: u64,
    buffered: BTreeSet<(NodeId, ReassemblyKey)>,
    resend_pending: bool,
    last_loss: Option<DropReason>,
}

impl DatumEntry {
    pub fn new(kind: &str, label: Option<String>, priority: Priority, data: Vec<u8>, now: Millis) -> Self {
        DatumEntry {
            kind: kind.to_string(),
            label,
            priority,
            data,
            enqueued_at: now,
            resends: 0,
            state: DatumState::Live,
            in_queue: 0,
            in_network: 0,
            buffered: BTreeSet::new(),
            resend_pending: false,
            last_loss: None,
        }
    }
}

/// State change worth logging.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Settled {
    Delivered,
    Dropped(DropReason),
}

#[derive(Debug, Default)]
pub struct DatumLedger {
    entries: BTreeMap<DatumId, DatumEntry>,
    /// Latest datum sent under each (source, message id).
    by_msg: BTreeMap<(NodeId, u16), DatumId>,
    /// Owner of each partial buffer, per receiving node.
    owners: BTreeMap<(NodeId, ReassemblyKey), DatumId>,
}

impl DatumLedger {
    pub fn get(&self, id: DatumId) -> Option<&DatumEntry> {
        self.entries.get(&id)
    }

    pub fn datum_for(&self, src: NodeId, msg_id: u16) -> Option<DatumId> {
        self.by_msg.get(&(src, msg_id)).copied()
    }

    /// A datum accepted into the sender queue as `fragments` fragments.
    pub fn admit(&mut self, id: DatumId, entry: DatumEntry, msg_id: u16, fragments: usize) {
        self.entries.insert(id, entry);
        self.queued(id, msg_id, fragments);
    }

    /// Fragments (re)queued under `msg_id`.
    pub fn queued(&mut self, id: DatumId, msg_id: u16, fragments: usize) {
        self.by_msg.insert((id.node, msg_id), id);
        if let Some(e) = self.entries.get_mut(&id) {
            e.in_queue += fragments as u64;
        }
    }

    /// A datum refused at enqueue time. Dropped straight away.
    pub fn reject(&mut self, id: DatumId, mut entry: DatumEntry, reason: DropReason) {
        entry.state = DatumState::Dropped(reason);
        self.entries.insert(id, entry);
    }

    /// One fragment left the queue; `survivors` copies made it onto a link.
    pub fn transmitted(&mut self, id: DatumId, survivors: u64, loss: Option<DropReason>) -> Option<Settled> {
        let e = self.entries.get_mut(&id)?;
        e.in_queue = e.in_queue.saturating_sub(1);
        e.in_network += survivors;
        if loss.is_some() {
            e.last_loss = loss;
        }
        self.settle(id)
    }

    /// A copy was forwarded and lost on the next hop, or died in a relay.
    pub fn packet_lost(&mut self, id: DatumId, reason: DropReason) -> Option<Settled> {
        let e = self.entries.get_mut(&id)?;
        e.in_network = e.in_network.saturating_sub(1);
        e.last_loss = Some(reason);
        self.settle(id)
    }

    /// A copy reached its destination and was absorbed (duplicate or new
    /// fragment of an incomplete message).
    pub fn arrived(&mut self, id: DatumId, at: NodeId, buffered: Option<ReassemblyKey>) -> Option<Settled> {
        let e = self.entries.get_mut(&id)?;
        e.in_network = e.in_network.saturating_sub(1);
        if let Some(key) = buffered {
            e.buffered.insert((at, key));
            self.owners.insert((at, key), id);
        }
        self.settle(id)
    }

    /// The copy completed a message. Delivered when the bytes match.
    pub fn completed(&mut self, id: DatumId, at: NodeId, key: ReassemblyKey, data: &[u8]) -> Option<Settled> {
        self.owners.remove(&(at, key));
        let e = self.entries.get_mut(&id)?;
        e.in_network = e.in_network.saturating_sub(1);
        e.buffered.remove(&(at, key));
        if e.state == DatumState::Live && e.data == data {
            e.state = DatumState::Delivered;
            return Some(Settled::Delivered);
        }
        if e.data != data {
            e.last_loss = Some(DropReason::Conflict);
        }
        self.settle(id)
    }

    /// A receiver abandoned the buffer for `key` because a frame disagreed
    /// with it. Settles the previous owner; the arriving copy is consumed.
    pub fn conflict(&mut self, arriving: Option<DatumId>, at: NodeId, key: ReassemblyKey) -> Vec<(DatumId, Settled)> {
        let mut out = Vec::new();
        if let Some(old) = self.owners.remove(&(at, key)) {
            if let Some(e) = self.entries.get_mut(&old) {
                e.buffered.remove(&(at, key));
                e.last_loss = Some(DropReason::Conflict);
            }
            if let Some(s) = self.settle(old) {
                out.push((old, s));
            }
        }
        if let Some(id) = arriving {
            if let Some(s) = self.packet_lost(id, DropReason::Conflict) {
                out.push((id, s));
            }
        }
        out
    }

    pub fn evicted(&mut self, at: NodeId, key: ReassemblyKey) -> Option<(DatumId, Option<Settled>)> {
        let id = self.owners.remove(&(at, key))?;
        let e = self.entries.get_mut(&id)?;
        e.buffered.remove(&(at, key));
        e.last_loss = Some(DropReason::ReassemblyEvicted);
        Some((id, self.settle(id)))
    }

    pub fn resend_scheduled(&mut self, id: DatumId) {
        if let Some(e) = self.entries.get_mut(&id) {
            e.resend_pending = true;
        }
    }

    /// Clears the pending flag; true when the datum still needs sending.
    pub fn resend_due(&mut self, id: DatumId) -> bool {
        match self.entries.get_mut(&id) {
            Some(e) => {
                e.resend_pending = false;
                e.resends += 1;
                e.state == DatumState::Live
            }
            None => false,
        }
    }

    /// Settles a datum whose resend could not be queued.
    pub fn resend_failed(&mut self, id: DatumId, reason: DropReason) -> Option<Settled> {
        let e = self.entries.get_mut(&id)?;
        e.last_loss = Some(reason);
        self.settle(id)
    }

    fn settle(&mut self, id: DatumId) -> Option<Settled> {
        let e = self.entries.get_mut(&id)?;
        if e.state != DatumState::Live {
            return None;
        }
        if e.in_queue == 0 && e.in_network == 0 && e.buffered.is_empty() && !e.resend_pending {
            let reason = e.last_loss.unwrap_or(DropReason::ChannelLoss);
            e.state = DatumState::Dropped(reason);
            return Some(Settled::Dropped(reason));
        }
        None
    }

    pub fn totals(&self) -> (u64, u64, u64, u64) {
        let mut t = (self.entries.len() as u64, 0, 0, 0);
        for e in self.entries.values() {
            match e.state {
                DatumState::Delivered => t.1 += 1,
                DatumState::Dropped(_) => t.2 += 1,
                DatumState::Live => t.3 += 1,
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(seq: u32) -> DatumId {
        DatumId { node: NodeId(1), seq }
    }

    fn key(msg_id: u16) -> ReassemblyKey {
        ReassemblyKey { src: NodeId(1), msg_id }
    }

    fn entry(data: &[u8]) -> DatumEntry {
        DatumEntry::new("k", None, Priority::Normal, data.to_vec(), 0)
    }

    #[test]
    fn all_copies_lost_drops() {
        let mut l = DatumLedger::default();
        l.admit(id(0), entry(b"x"), 0, 1);
        assert_eq!(
            l.transmitted(id(0), 0, Some(DropReason::ChannelLoss)),
            Some(Settled::Dropped(DropReason::ChannelLoss))
        );
        assert_eq!(l.totals(), (1, 0, 1, 0));
    }

    #[test]
    fn partial_buffer_keeps_datum_live_until_evicted() {
        let mut l = DatumLedger::default();
        l.admit(id(0), entry(b"xy"), 0, 2);
        assert_eq!(l.transmitted(id(0), 1, Some(DropReason::ChannelLoss)), None);
        assert_eq!(l.arrived(id(0), NodeId(6), Some(key(0))), None);
        assert_eq!(l.transmitted(id(0), 0, Some(DropReason::LinkOutage)), None);
        assert_eq!(l.totals().3, 1);
        let (d, s) = l.evicted(NodeId(6), key(0)).unwrap();
        assert_eq!(d, id(0));
        assert_eq!(s, Some(Settled::Dropped(DropReason::ReassemblyEvicted)));
    }

    #[test]
    fn delivery_is_terminal() {
        let mut l = DatumLedger::default();
        l.admit(id(0), entry(b"x"), 0, 1);
        l.transmitted(id(0), 4, None);
        assert_eq!(l.completed(id(0), NodeId(6), key(0), b"x"), Some(Settled::Delivered));
        for _ in 0..3 {
            assert_eq!(l.arrived(id(0), NodeId(6), None), None);
        }
        assert_eq!(l.totals(), (1, 1, 0, 0));
    }

    #[test]
    fn pending_resend_holds_datum() {
        let mut l = DatumLedger::default();
        l.admit(id(0), entry(b"x"), 0, 1);
        l.resend_scheduled(id(0));
        assert_eq!(l.transmitted(id(0), 0, Some(DropReason::LinkOutage)), None);
        assert!(l.resend_due(id(0)));
        assert_eq!(
            l.resend_failed(id(0), DropReason::QueueFull),
            Some(Settled::Dropped(DropReason::QueueFull))
        );
    }

    #[test]
    fn conflict_settles_both() {
        let mut l = DatumLedger::default();
        l.admit(id(0), entry(b"ab"), 0, 2);
        l.admit(id(1), entry(b"c"), 0, 1);
        l.transmitted(id(0), 1, None);
        l.arrived(id(0), NodeId(6), Some(key(0)));
        l.transmitted(id(0), 0, Some(DropReason::ChannelLoss));
        l.transmitted(id(1), 1, None);
        let s = l.conflict(Some(id(1)), NodeId(6), key(0));
        assert_eq!(
            s,
            vec![
                (id(0), Settled::Dropped(DropReason::Conflict)),
                (id(1), Settled::Dropped(DropReason::Conflict))
            ]
        );
    }
}
