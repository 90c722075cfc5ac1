use std::collections::VecDeque;

use thiserror::Error;

use super::{DatumId, Priority};
use crate::fragproto::Fragment;
use crate::Millis;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueueError {
    #[error("queue full: {needed} bytes needed, {free} free")]
    Full { needed: usize, free: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueEntry {
    pub datum: DatumId,
    pub priority: Priority,
    pub enqueued_at: Millis,
    pub fragments: VecDeque<Fragment>,
}

impl QueueEntry {
    fn bytes(&self) -> usize {
        self.fragments.iter().map(|f| f.payload.len()).sum()
    }
}

/// Two-level outbound queue. High drains before Normal; each level is FIFO
/// by enqueue time, ties broken by ascending datum id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreQueue {
    high: VecDeque<QueueEntry>,
    normal: VecDeque<QueueEntry>,
    capacity_bytes: usize,
    stored_bytes: usize,
}

impl StoreQueue {
    pub fn new(capacity_bytes: usize) -> Self {
        StoreQueue {
            high: VecDeque::new(),
            normal: VecDeque::new(),
            capacity_bytes,
            stored_bytes: 0,
        }
    }

    pub fn capacity_bytes(&self) -> usize {
        self.capacity_bytes
    }

    pub fn stored_bytes(&self) -> usize {
        self.stored_bytes
    }

    pub fn free_bytes(&self) -> usize {
        self.capacity_bytes - self.stored_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.high.is_empty() && self.normal.is_empty()
    }

    pub fn len(&self) -> usize {
        self.high.len() + self.normal.len()
    }

    pub fn fragment_count(&self) -> usize {
        self.entries().map(|e| e.fragments.len()).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = &QueueEntry> {
        self.high.iter().chain(self.normal.iter())
    }

    pub fn push(&mut self, entry: QueueEntry) -> Result<(), QueueError> {
        let bytes = entry.bytes();
        if bytes > self.free_bytes() {
            return Err(QueueError::Full {
                needed: bytes,
                free: self.free_bytes(),
            });
        }
        self.stored_bytes += bytes;
        let level = match entry.priority {
            Priority::High => &mut self.high,
            Priority::Normal => &mut self.normal,
        };
        let key = (entry.enqueued_at, entry.datum);
        let pos = level.partition_point(|e| (e.enqueued_at, e.datum) <= key);
        level.insert(pos, entry);
        Ok(())
    }

    pub fn peek(&self) -> Option<(&QueueEntry, &Fragment)> {
        let entry = self.high.front().or_else(|| self.normal.front())?;
        entry.fragments.front().map(|f| (entry, f))
    }

    /// Removes the next fragment to send. The second value is true when the
    /// fragment was the datum's last.
    pub fn pop_fragment(&mut self) -> Option<(DatumId, Fragment, bool)> {
        let level = if !self.high.is_empty() {
            &mut self.high
        } else {
            &mut self.normal
        };
        let entry = level.front_mut()?;
        let frag = entry.fragments.pop_front()?;
        let datum = entry.datum;
        let last = entry.fragments.is_empty();
        if last {
            level.pop_front();
        }
        self.stored_bytes -= frag.payload.len();
        Some((datum, frag, last))
    }

    /// Drops a datum still waiting in the queue, returning how many of its
    /// fragments were removed.
    pub fn remove(&mut self, datum: DatumId) -> usize {
        let mut removed = 0;
        for level in [&mut self.high, &mut self.normal] {
            if let Some(pos) = level.iter().position(|e| e.datum == datum) {
                let e = level.remove(pos).expect("position valid");
                removed = e.fragments.len();
                self.stored_bytes -= e.bytes();
            }
        }
        removed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragproto::fragment_datum;
    use crate::NodeId;

    fn entry(seq: u32, prio: Priority, at: Millis, len: usize) -> QueueEntry {
        QueueEntry {
            datum: DatumId { node: NodeId(1), seq },
            priority: prio,
            enqueued_at: at,
            fragments: fragment_datum(NodeId(1), seq as u16, &vec![seq as u8; len], 32)
                .unwrap()
                .into(),
        }
    }

    #[test]
    fn high_first_then_fifo() {
        let mut q = StoreQueue::new(10_000);
        q.push(entry(1, Priority::Normal, 0, 30)).unwrap();
        q.push(entry(2, Priority::High, 5, 10)).unwrap();
        q.push(entry(3, Priority::Normal, 5, 10)).unwrap();
        let order: Vec<u32> = std::iter::from_fn(|| q.pop_fragment().map(|(d, _, _)| d.seq)).collect();
        assert_eq!(order, vec![2, 1, 1, 3]);
        assert_eq!(q.stored_bytes(), 0);
    }

    #[test]
    fn ties_by_datum_id() {
        let mut q = StoreQueue::new(10_000);
        q.push(entry(7, Priority::Normal, 10, 1)).unwrap();
        q.push(entry(4, Priority::Normal, 10, 1)).unwrap();
        assert_eq!(q.pop_fragment().unwrap().0.seq, 4);
    }

    #[test]
    fn capacity() {
        let mut q = StoreQueue::new(50);
        q.push(entry(1, Priority::Normal, 0, 45)).unwrap();
        assert_eq!(
            q.push(entry(2, Priority::Normal, 0, 10)),
            Err(QueueError::Full { needed: 10, free: 5 })
        );
        assert_eq!(q.fragment_count(), 2);
        assert_eq!(q.remove(DatumId { node: NodeId(1), seq: 1 }), 2);
        assert_eq!(q.stored_bytes(), 0);
    }
}
