//! Fragmentation of data into fixed-size frames, the frame codec, and
//! reassembly with duplicate suppression.
//!
//! Wire layout (big-endian), always exactly `frame_bytes` long:
//!
//! ```text
//! 0..2  msg_id
//! 2     frag_index
//! 3     frag_total
//! 4     src_node
//! 5     payload_len
//! 6..   payload, then zero padding
//! ```
//!
//! There is no per-frame checksum; loss is handled at the link layer and
//! by redundant copies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Millis, NodeId};

pub const HEADER_LEN: usize = 6;
/// Frame size of the HumSat terminal.
pub const DEFAULT_FRAME_BYTES: usize = 32;
pub const MAX_FRAGMENTS: usize = u8::MAX as usize;
/// Largest frame whose payload length still fits the one-byte field.
pub const MAX_FRAME_BYTES: usize = HEADER_LEN + u8::MAX as usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FragError {
    #[error("frame size {0} outside {min}..={max}", min = HEADER_LEN + 1, max = MAX_FRAME_BYTES)]
    BadFrameSize(usize),
    #[error("datum of {len} bytes exceeds the {max}-byte limit")]
    DatumTooLarge { len: usize, max: usize },
    #[error("payload of {len} bytes exceeds frame capacity {cap}")]
    PayloadOverflow { len: usize, cap: usize },
    #[error("frame is {got} bytes, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("bad header: {0}")]
    BadHeader(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FragmentHeader {
    pub msg_id: u16,
    pub frag_index: u8,
    pub frag_total: u8,
    pub src_node: u8,
    pub payload_len: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Fragment {
    pub header: FragmentHeader,
    pub payload: Vec<u8>,
}

impl Fragment {
    pub fn key(&self) -> ReassemblyKey {
        ReassemblyKey {
            src: NodeId(self.header.src_node),
            msg_id: self.header.msg_id,
        }
    }
}

fn check_frame_size(frame_bytes: usize) -> Result<usize, FragError> {
    if !(HEADER_LEN + 1..=MAX_FRAME_BYTES).contains(&frame_bytes) {
        return Err(FragError::BadFrameSize(frame_bytes));
    }
    Ok(frame_bytes - HEADER_LEN)
}

/// Largest datum that fits in [`MAX_FRAGMENTS`] frames of `frame_bytes`.
pub fn max_datum_len(frame_bytes: usize) -> Result<usize, FragError> {
    Ok(check_frame_size(frame_bytes)? * MAX_FRAGMENTS)
}

/// Number of fragments `len` bytes will occupy (an empty datum still needs one).
pub fn fragment_count(len: usize, frame_bytes: usize) -> Result<usize, FragError> {
    let cap = check_frame_size(frame_bytes)?;
    if len > cap * MAX_FRAGMENTS {
        return Err(FragError::DatumTooLarge {
            len,
            max: cap * MAX_FRAGMENTS,
        });
    }
    Ok(len.div_ceil(cap).max(1))
}

pub fn fragment_datum(
    src: NodeId,
    msg_id: u16,
    data: &[u8],
    frame_bytes: usize,
) -> Result<Vec<Fragment>, FragError> {
    let cap = check_frame_size(frame_bytes)?;
    let total = fragment_count(data.len(), frame_bytes)?;
    let chunks: Vec<&[u8]> = if data.is_empty() {
        vec![&[][..]]
    } else {
        data.chunks(cap).collect()
    };
    debug_assert_eq!(chunks.len(), total);
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, chunk)| Fragment {
            header: FragmentHeader {
                msg_id,
                frag_index: i as u8,
                frag_total: total as u8,
                src_node: src.0,
                payload_len: chunk.len() as u8,
            },
            payload: chunk.to_vec(),
        })
        .collect())
}

pub fn encode_frame(f: &Fragment, frame_bytes: usize) -> Result<Vec<u8>, FragError> {
    let cap = check_frame_size(frame_bytes)?;
    let h = &f.header;
    if f.payload.len() > cap || h.payload_len as usize > cap {
        return Err(FragError::PayloadOverflow {
            len: f.payload.len().max(h.payload_len as usize),
            cap,
        });
    }
    if f.payload.len() != h.payload_len as usize {
        return Err(FragError::BadHeader("payload_len does not match payload"));
    }
    if h.frag_total == 0 {
        return Err(FragError::BadHeader("frag_total is zero"));
    }
    if h.frag_index >= h.frag_total {
        return Err(FragError::BadHeader("frag_index not below frag_total"));
    }
    let mut out = vec![0u8; frame_bytes];
    out[0..2].copy_from_slice(&h.msg_id.to_be_bytes());
    out[2] = h.frag_index;
    out[3] = h.frag_total;
    out[4] = h.src_node;
    out[5] = h.payload_len;
    out[HEADER_LEN..HEADER_LEN + f.payload.len()].copy_from_slice(&f.payload);
    Ok(out)
}

pub fn decode_frame(wire: &[u8], frame_bytes: usize) -> Result<Fragment, FragError> {
    let cap = check_frame_size(frame_bytes)?;
    if wire.len() != frame_bytes {
        return Err(FragError::BadLength {
            expected: frame_bytes,
            got: wire.len(),
        });
    }
    let header = FragmentHeader {
        msg_id: u16::from_be_bytes([wire[0], wire[1]]),
        frag_index: wire[2],
        frag_total: wire[3],
        src_node: wire[4],
        payload_len: wire[5],
    };
    if header.frag_total == 0 {
        return Err(FragError::BadHeader("frag_total is zero"));
    }
    if header.frag_index >= header.frag_total {
        return Err(FragError::BadHeader("frag_index not below frag_total"));
    }
    if header.payload_len as usize > cap {
        return Err(FragError::BadHeader("payload_len exceeds capacity"));
    }
    let payload = wire[HEADER_LEN..HEADER_LEN + header.payload_len as usize].to_vec();
    Ok(Fragment { header, payload })
}

/// Reassembly is keyed per source and message id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReassemblyKey {
    pub src: NodeId,
    pub msg_id: u16,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReassemblyBuffer {
    pub frag_total: u8,
    pub slots: BTreeMap<u8, Vec<u8>>,
    pub first_seen: Millis,
    pub last_update: Millis,
}

impl ReassemblyBuffer {
    pub fn is_complete(&self) -> bool {
        self.slots.len() == self.frag_total as usize
    }
}

/// Remembers a completed message so late redundant copies are recognised.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Completed {
    frag_total: u8,
    slots: BTreeMap<u8, Vec<u8>>,
    at: Millis,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IngestOutcome {
    Duplicate,
    Stored,
    Completed(Vec<u8>),
    Conflict,
}

impl IngestOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            IngestOutcome::Duplicate => "duplicate",
            IngestOutcome::Stored => "stored",
            IngestOutcome::Completed(_) => "completed",
            IngestOutcome::Conflict => "conflict",
        }
    }
}

/// Per-receiver reassembly state.
///
/// Completed messages leave a tombstone holding their fragments until the
/// next eviction sweep past `max_age`, so that trailing copies of the last
/// fragment report `Duplicate` instead of opening a new buffer. A fragment
/// that matches the tombstone's key but not its contents starts a fresh
/// message (msg_id reuse after wrap-around).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReassemblyStore {
    buffers: BTreeMap<ReassemblyKey, ReassemblyBuffer>,
    completed: BTreeMap<ReassemblyKey, Completed>,
}

impl ReassemblyStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of incomplete buffers.
    pub fn len(&self) -> usize {
        self.buffers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffers.is_empty()
    }

    pub fn buffer(&self, key: &ReassemblyKey) -> Option<&ReassemblyBuffer> {
        self.buffers.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &ReassemblyKey> {
        self.buffers.keys()
    }

    pub fn ingest(&mut self, f: &Fragment, now: Millis) -> IngestOutcome {
        let key = f.key();
        let idx = f.header.frag_index;
        let total = f.header.frag_total;

        if let Some(done) = self.completed.get(&key) {
            if done.frag_total == total && done.slots.get(&idx) == Some(&f.payload) {
                return IngestOutcome::Duplicate;
            }
            self.completed.remove(&key);
        }

        let buf = self.buffers.entry(key).or_insert_with(|| ReassemblyBuffer {
            frag_total: total,
            slots: BTreeMap::new(),
            first_seen: now,
            last_update: now,
        });
        if buf.frag_total != total {
            self.buffers.remove(&key);
            return IngestOutcome::Conflict;
        }
        if buf.slots.contains_key(&idx) {
            return IngestOutcome::Duplicate;
        }
        buf.slots.insert(idx, f.payload.clone());
        buf.last_update = now;
        if !buf.is_complete() {
            return IngestOutcome::Stored;
        }
        let buf = self.buffers.remove(&key).expect("buffer present");
        let data = buf.slots.values().flatten().copied().collect();
        self.completed.insert(
            key,
            Completed {
                frag_total: total,
                slots: buf.slots,
                at: now,
            },
        );
        IngestOutcome::Completed(data)
    }

    /// Drops incomplete buffers idle for strictly more than `max_age` and
    /// returns their keys. Stale completion tombstones are discarded too but
    /// not reported.
    pub fn evict_stale(&mut self, now: Millis, max_age: Millis) -> Vec<ReassemblyKey> {
        debug_assert!(max_age > 0);
        let stale: Vec<_> = self
            .buffers
            .iter()
            .filter(|(_, b)| now - b.last_update > max_age)
            .map(|(k, _)| *k)
            .collect();
        for k in &stale {
            self.buffers.remove(k);
        }
        self.completed.retain(|_, c| now - c.at <= max_age);
        stale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    fn frag(msg_id: u16, idx: u8, total: u8, src: u8, payload: &[u8]) -> Fragment {
        Fragment {
            header: FragmentHeader {
                msg_id,
                frag_index: idx,
                frag_total: total,
                src_node: src,
                payload_len: payload.len() as u8,
            },
            payload: payload.to_vec(),
        }
    }

    #[test]
    fn fragment_sizes() {
        let data: Vec<u8> = (0..100).collect();
        let f = fragment_datum(NodeId(1), 0, &data, 32).unwrap();
        let lens: Vec<_> = f.iter().map(|x| x.header.payload_len).collect();
        assert_eq!(lens, vec![26, 26, 26, 22]);
        assert!(f.iter().all(|x| x.header.frag_total == 4));
        let joined: Vec<u8> = f.iter().flat_map(|x| x.payload.clone()).collect();
        assert_eq!(joined, data);

        let empty = fragment_datum(NodeId(1), 0, &[], 32).unwrap();
        assert_eq!(empty.len(), 1);
        assert_eq!(empty[0].header.frag_total, 1);
        assert_eq!(empty[0].header.payload_len, 0);

        let exact = fragment_datum(NodeId(1), 0, &[7; 26], 32).unwrap();
        assert_eq!(exact.len(), 1);
        assert_eq!(exact[0].header.payload_len, 26);

        assert!(fragment_datum(NodeId(1), 0, &vec![0; 6630], 32).is_ok());
        assert_eq!(
            fragment_datum(NodeId(1), 0, &vec![0; 6631], 32),
            Err(FragError::DatumTooLarge { len: 6631, max: 6630 })
        );
        assert_eq!(fragment_datum(NodeId(1), 0, &[1], 6), Err(FragError::BadFrameSize(6)));
    }

    #[test]
    fn encode_layout() {
        let f = frag(1, 0, 1, 7, b"AB");
        let wire = encode_frame(&f, 32).unwrap();
        let mut expect = vec![0x00, 0x01, 0x00, 0x01, 0x07, 0x02, 0x41, 0x42];
        expect.extend([0u8; 24]);
        assert_eq!(wire, expect);

        let z = frag(0, 0, 1, 0, b"");
        let mut expect = vec![0u8; 32];
        expect[3] = 1;
        assert_eq!(encode_frame(&z, 32).unwrap(), expect);

        let big = frag(0, 0, 1, 0, &[0; 27]);
        assert_eq!(
            encode_frame(&big, 32),
            Err(FragError::PayloadOverflow { len: 27, cap: 26 })
        );
    }

    #[test]
    fn decode_errors() {
        let f = frag(1, 0, 1, 7, b"AB");
        let wire = encode_frame(&f, 32).unwrap();
        assert_eq!(decode_frame(&wire, 32).unwrap(), f);
        assert_eq!(
            decode_frame(&wire[..31], 32),
            Err(FragError::BadLength { expected: 32, got: 31 })
        );
        let mut zero_total = wire.clone();
        zero_total[3] = 0;
        assert!(matches!(decode_frame(&zero_total, 32), Err(FragError::BadHeader(_))));
        let mut idx_high = wire.clone();
        idx_high[2] = 1;
        assert!(matches!(decode_frame(&idx_high, 32), Err(FragError::BadHeader(_))));
        let mut long = wire.clone();
        long[5] = 27;
        assert!(matches!(decode_frame(&long, 32), Err(FragError::BadHeader(_))));
    }

    #[test]
    fn decode_ignores_padding() {
        let f = frag(3, 0, 1, 2, b"xyz");
        let mut wire = encode_frame(&f, 32).unwrap();
        wire[31] = 0xff;
        assert_eq!(decode_frame(&wire, 32).unwrap(), f);
    }

    #[test]
    fn four_copies() {
        let mut s = ReassemblyStore::new();
        let f = frag(5, 0, 2, 1, b"hello");
        let outcomes: Vec<_> = (0..4).map(|_| s.ingest(&f, 0)).collect();
        assert_eq!(
            outcomes,
            vec![
                IngestOutcome::Stored,
                IngestOutcome::Duplicate,
                IngestOutcome::Duplicate,
                IngestOutcome::Duplicate
            ]
        );
    }

    #[test]
    fn single_fragment_completes_then_duplicates() {
        let mut s = ReassemblyStore::new();
        let f = frag(5, 0, 1, 1, b"hi");
        assert_eq!(s.ingest(&f, 0), IngestOutcome::Completed(b"hi".to_vec()));
        for _ in 0..3 {
            assert_eq!(s.ingest(&f, 1), IngestOutcome::Duplicate);
        }
        assert!(s.is_empty());
    }

    #[test]
    fn all_orderings_of_three() {
        let data: Vec<u8> = (0..70).collect();
        let frags = fragment_datum(NodeId(9), 77, &data, 32).unwrap();
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for order in orders {
            let mut s = ReassemblyStore::new();
            assert_eq!(s.ingest(&frags[order[0]], 0), IngestOutcome::Stored);
            assert_eq!(s.ingest(&frags[order[1]], 1), IngestOutcome::Stored);
            assert_eq!(s.ingest(&frags[order[2]], 2), IngestOutcome::Completed(data.clone()));
        }
    }

    #[test]
    fn conflict_drops_buffer() {
        let mut s = ReassemblyStore::new();
        assert_eq!(s.ingest(&frag(1, 0, 3, 1, b"a"), 0), IngestOutcome::Stored);
        assert_eq!(s.ingest(&frag(1, 1, 2, 1, b"b"), 0), IngestOutcome::Conflict);
        assert!(s.is_empty());
    }

    #[test]
    fn eviction() {
        let mut s = ReassemblyStore::new();
        s.ingest(&frag(1, 0, 2, 1, b"a"), 0);
        // exactly max_age idle: kept
        assert!(s.evict_stale(200, 200).is_empty());
        assert_eq!(s.len(), 1);
        let ev = s.evict_stale(201, 200);
        assert_eq!(ev, vec![ReassemblyKey { src: NodeId(1), msg_id: 1 }]);
        assert!(s.is_empty());

        s.ingest(&frag(1, 0, 2, 1, b"a"), 1000);
        assert!(s.evict_stale(1001, 200).is_empty());

        let mut two = ReassemblyStore::new();
        two.ingest(&frag(1, 0, 2, 1, b"a"), 0);
        two.ingest(&frag(2, 0, 2, 1, b"a"), 0);
        two.ingest(&frag(3, 0, 2, 1, b"a"), 500);
        assert_eq!(two.evict_stale(300, 200).len(), 2);
        assert_eq!(two.len(), 1);
    }

    #[test]
    fn msg_id_reuse_after_completion_and_eviction() {
        let mut s = ReassemblyStore::new();
        let a = fragment_datum(NodeId(1), 9, b"first message, two frames long....", 32).unwrap();
        let b = fragment_datum(NodeId(1), 9, b"second message also two frames....", 32).unwrap();
        assert_eq!(s.ingest(&a[0], 0), IngestOutcome::Stored);
        assert!(matches!(s.ingest(&a[1], 1), IngestOutcome::Completed(_)));
        assert_eq!(s.ingest(&b[0], 10), IngestOutcome::Stored);
        assert_eq!(
            s.ingest(&b[1], 11),
            IngestOutcome::Completed(b"second message also two frames....".to_vec())
        );

        // same id again, first attempt evicted incomplete
        let c = fragment_datum(NodeId(1), 9, b"second message also two frames....", 32).unwrap();
        s.evict_stale(10_000, 100);
        assert_eq!(s.ingest(&c[0], 10_001), IngestOutcome::Stored);
        s.evict_stale(20_000, 100);
        assert_eq!(s.ingest(&c[0], 20_001), IngestOutcome::Stored);
        assert!(matches!(s.ingest(&c[1], 20_002), IngestOutcome::Completed(_)));
    }

    fn reassemble_shuffled(data: &[u8], seed: u64) -> Option<Vec<u8>> {
        let frags = fragment_datum(NodeId(3), 1234, data, 32).unwrap();
        let mut wires: Vec<Vec<u8>> = frags
            .iter()
            .flat_map(|f| std::iter::repeat_n(encode_frame(f, 32).unwrap(), 4))
            .collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        wires.shuffle(&mut rng);
        let mut store = ReassemblyStore::new();
        let mut done = None;
        for w in wires {
            let f = decode_frame(&w, 32).unwrap();
            if let IngestOutcome::Completed(d) = store.ingest(&f, 0) {
                assert!(done.is_none(), "completed twice");
                done = Some(d);
            }
        }
        done
    }

    #[test]
    fn boundary_lengths_roundtrip() {
        for len in [0usize, 1, 26, 27, 52, 6630] {
            let data: Vec<u8> = (0..len).map(|i| (i * 31 % 251) as u8).collect();
            assert_eq!(reassemble_shuffled(&data, len as u64).as_deref(), Some(&data[..]));
        }
    }

    proptest! {
        #[test]
        fn encode_decode_identity(msg_id: u16, src: u8, total in 1u8..=255, payload in proptest::collection::vec(any::<u8>(), 0..=26), idx_seed: u8) {
            let idx = idx_seed % total;
            let f = frag(msg_id, idx, total, src, &payload);
            let wire = encode_frame(&f, 32).unwrap();
            prop_assert_eq!(wire.len(), 32);
            prop_assert_eq!(decode_frame(&wire, 32).unwrap(), f);
        }

        #[test]
        fn multiset_idempotent(len in 0usize..300, extra in proptest::collection::vec(0usize..100, 0..30), seed: u64) {
            let data: Vec<u8> = (0..len).map(|i| (i as u64 ^ seed) as u8).collect();
            let frags = fragment_datum(NodeId(1), 1, &data, 32).unwrap();
            // support set minus the last fragment keeps the buffer open
            let support: Vec<_> = frags[..frags.len() - 1].to_vec();
            let mut a = ReassemblyStore::new();
            for f in &support { a.ingest(f, 0); }
            let mut b = ReassemblyStore::new();
            let mut multiset = support.clone();
            for e in &extra {
                if !support.is_empty() { multiset.push(support[e % support.len()].clone()); }
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            multiset.shuffle(&mut rng);
            for f in &multiset { b.ingest(f, 0); }
            prop_assert_eq!(a, b);
        }
    }
}
