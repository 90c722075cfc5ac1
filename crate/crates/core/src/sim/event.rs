use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dtn::{DatumId, Packet};
use crate::{Millis, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    FrameArrival { from: NodeId, link: usize, packet: Packet },
    /// `periodic` ticks reschedule themselves; one-shot ticks wake a
    /// radio as soon as it is free.
    TickSatComms { periodic: bool },
    WindowOpen { satellite: NodeId, start: Millis, end: Millis },
    WindowClose { satellite: NodeId, start: Millis },
    EnqueueDatum(DatumSource),
    LinkStateChange { link: usize, up: bool },
    ScriptStep { index: usize, phase: ScriptPhase },
    /// Periodic sweep: motion, eviction, store flushing.
    Housekeeping,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatumSource {
    Traffic { index: usize, emitted: u32 },
    Resend(DatumId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScriptPhase {
    Act,
    Check,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub time: Millis,
    pub seq: u64,
    pub target: Option<NodeId>,
    pub kind: EventKind,
}

impl Eq for Event {}

impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pending events in (time, insertion) order.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn push(&mut self, time: Millis, target: Option<NodeId>, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, target, kind });
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<Millis> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Event> {
        self.heap.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_then_insertion_order() {
        let mut q = EventQueue::default();
        q.push(5, None, EventKind::Housekeeping);
        q.push(1, None, EventKind::TickSatComms { periodic: true });
        q.push(5, None, EventKind::TickSatComms { periodic: true });
        q.push(1, None, EventKind::Housekeeping);
        let got: Vec<_> = std::iter::from_fn(|| q.pop()).map(|e| (e.time, e.seq)).collect();
        assert_eq!(got, vec![(1, 1), (1, 3), (5, 0), (5, 2)]);
    }
}
