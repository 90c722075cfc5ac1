//! Append-only event log, one JSON object per line.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::script::{Action, Outcome};
use crate::dtn::{DatumId, DropReason, NodeKind, PassTag, Priority, SlotAssignment, StoreReason};
use crate::{Millis, NodeId};

/// Bumped whenever a record changes shape.
pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: Millis,
    pub seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(flatten)]
    pub detail: LogDetail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum LogDetail {
    RunStart(RunHeader),
    WindowOpen {
        satellite: NodeId,
        start: Millis,
        end: Millis,
    },
    WindowClose {
        satellite: NodeId,
        start: Millis,
    },
    SlotAssigned(SlotRecord),
    Enqueue {
        datum: DatumId,
        kind: String,
        bytes: usize,
        fragments: usize,
        msg_id: u16,
        priority: Priority,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        /// 0 for the original, n for the nth resend.
        attempt: u32,
    },
    EnqueueRejected {
        datum: DatumId,
        kind: String,
        bytes: usize,
        reason: DropReason,
        error: String,
        attempt: u32,
    },
    Transmit(TransmitRecord),
    FrameArrival(ArrivalRecord),
    StoreFlush {
        next_hop: NodeId,
        packets: u64,
    },
    StoreExpired {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        datum: Option<DatumId>,
        reason: StoreReason,
    },
    ReassemblyEvicted {
        src: NodeId,
        msg_id: u16,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        datum: Option<DatumId>,
    },
    DatumDelivered {
        datum: DatumId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        bytes: usize,
        latency_ms: Millis,
    },
    DatumDropped {
        datum: DatumId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
        reason: DropReason,
    },
    LinkState {
        link: String,
        up: bool,
    },
    ScriptAction {
        step: String,
        action: Action,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    ScriptResult(ScriptOutcome),
    EnduranceViolation {
        airborne_ms: Millis,
        limit_ms: Millis,
    },
    RunEnd(RunSummary),
}

impl LogDetail {
    pub fn kind(&self) -> &'static str {
        match self {
            LogDetail::RunStart(_) => "run_start",
            LogDetail::WindowOpen { .. } => "window_open",
            LogDetail::WindowClose { .. } => "window_close",
            LogDetail::SlotAssigned(_) => "slot_assigned",
            LogDetail::Enqueue { .. } => "enqueue",
            LogDetail::EnqueueRejected { .. } => "enqueue_rejected",
            LogDetail::Transmit(_) => "transmit",
            LogDetail::FrameArrival(_) => "frame_arrival",
            LogDetail::StoreFlush { .. } => "store_flush",
            LogDetail::StoreExpired { .. } => "store_expired",
            LogDetail::ReassemblyEvicted { .. } => "reassembly_evicted",
            LogDetail::DatumDelivered { .. } => "datum_delivered",
            LogDetail::DatumDropped { .. } => "datum_dropped",
            LogDetail::LinkState { .. } => "link_state",
            LogDetail::ScriptAction { .. } => "script_action",
            LogDetail::ScriptResult(_) => "script_result",
            LogDetail::EnduranceViolation { .. } => "endurance_violation",
            LogDetail::RunEnd(_) => "run_end",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: u32,
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: Millis,
    pub frame_bytes: usize,
    pub nodes: Vec<NodeInfo>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub id: NodeId,
    pub kind: NodeKind,
    pub name: String,
    /// Redundancy of the node's radio, when it has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub satellite: NodeId,
    pub window_start: Millis,
    pub window_end: Millis,
    pub scheduler: String,
    pub quantum_ms: Millis,
    pub assignments: Vec<SlotAssignment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyRecord {
    pub start: Millis,
    pub end: Millis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lost: Option<DropReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransmitRecord {
    pub datum: DatumId,
    pub msg_id: u16,
    pub frag_index: u8,
    pub frag_total: u8,
    pub payload_len: u8,
    /// Wire frame, hex encoded.
    pub frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<String>,
    pub copies: Vec<CopyRecord>,
    pub airtime_ms: Millis,
    /// Standby time accounted since the previous transmission.
    pub idle_ms: Millis,
    /// Energy accrued by this transmission, standby gap included.
    pub energy_j: f64,
    /// Transmit share of `energy_j`.
    pub tx_energy_j: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<PassTag>,
    pub last_fragment: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ArrivalOutcome {
    Stored,
    Completed,
    Duplicate,
    Conflict,
    Forwarded { next_hop: NodeId, via: String, lost: bool },
    Held { reason: StoreReason },
    DecodeError { error: String },
    NodeInactive,
    /// The link went down while the frame was in flight.
    LinkDown,
}

impl ArrivalOutcome {
    /// Handed to this node's reassembly.
    pub fn reassembled(&self) -> bool {
        matches!(
            self,
            ArrivalOutcome::Stored | ArrivalOutcome::Completed | ArrivalOutcome::Duplicate | ArrivalOutcome::Conflict
        )
    }

    /// First copy of a fragment at its destination.
    pub fn is_new(&self) -> bool {
        matches!(self, ArrivalOutcome::Stored | ArrivalOutcome::Completed)
    }

    /// The node decoded the frame.
    pub fn received(&self) -> bool {
        self.reassembled() || matches!(self, ArrivalOutcome::Forwarded { .. } | ArrivalOutcome::Held { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub from: NodeId,
    pub link: String,
    pub frame: String,
    #[serde(flatten)]
    pub outcome: ArrivalOutcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datum: Option<DatumId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_len: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<PassTag>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptOutcome {
    pub index: usize,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub row: String,
    pub expected: Outcome,
    pub observed: Outcome,
    pub passed: bool,
    /// 2 when the retry actions ran.
    pub attempts: u32,
    pub extension: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalStandby {
    pub node: NodeId,
    pub idle_ms: Millis,
    pub energy_j: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub enqueued: u64,
    pub delivered: u64,
    pub dropped: u64,
    /// Datums still live in the ledger.
    pub stored: u64,
    /// Undelivered datums actually found in queues, in flight, in relay
    /// stores, in partial buffers or awaiting resend at the end.
    pub resident: u64,
    pub standby: Vec<FinalStandby>,
    pub events: u64,
}

#[derive(Debug, thiserror::Error)]
#[error("log line {line}: {source}")]
pub struct LogParseError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

pub fn to_jsonl(records: &[LogRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<LogRecord>, LogParseError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| LogParseError { line: i + 1, source }))
        .collect()
}

/// In-memory log with an optional streaming sink. After the first sink
/// failure further writes are skipped; the records stay in memory.
pub(crate) struct EventLog<'a> {
    pub records: Vec<LogRecord>,
    sink: Option<&'a mut dyn Write>,
    pub failure: Option<io::Error>,
}

impl<'a> EventLog<'a> {
    pub fn new(sink: Option<&'a mut dyn Write>) -> Self {
        EventLog {
            records: Vec::new(),
            sink,
            failure: None,
        }
    }

    pub fn push(&mut self, record: LogRecord) {
        if self.failure.is_none() {
            if let Some(w) = self.sink.as_mut() {
                let mut line = serde_json::to_vec(&record).expect("log records serialize");
                line.push(b'\n');
                if let Err(e) = w.write_all(&line) {
                    self.failure = Some(e);
                }
            }
        }
        self.records.push(record);
    }

    pub fn flush(&mut self) {
        if self.failure.is_none() {
            if let Some(w) = self.sink.as_mut() {
                if let Err(e) = w.flush() {
                    self.failure = Some(e);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_shape() {
        let r = LogRecord {
            t: 1214,
            seq: 7,
            node: Some(NodeId(2)),
            detail: LogDetail::FrameArrival(ArrivalRecord {
                from: NodeId(1),
                link: "sdr".into(),
                frame: "00000001".into(),
                outcome: ArrivalOutcome::Forwarded {
                    next_hop: NodeId(3),
                    via: "eth0".into(),
                    lost: false,
                },
                datum: None,
                payload_len: Some(10),
                pass: None,
            }),
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["kind"], "frame_arrival");
        assert_eq!(v["node"], 2);
        assert_eq!(v["detail"]["outcome"], "forwarded");
        assert_eq!(v["detail"]["frame"], "00000001");
        let back = parse_jsonl(&to_jsonl(std::slice::from_ref(&r))).unwrap();
        assert_eq!(back, vec![r]);
    }

    #[test]
    fn floats_roundtrip_exactly() {
        let r = LogRecord {
            t: 0,
            seq: 0,
            node: None,
            detail: LogDetail::RunEnd(RunSummary {
                enqueued: 0,
                delivered: 0,
                dropped: 0,
                stored: 0,
                resident: 0,
                standby: vec![FinalStandby {
                    node: NodeId(1),
                    idle_ms: 3,
                    energy_j: 0.1 + 0.2,
                }],
                events: 0,
            }),
        };
        assert_eq!(parse_jsonl(&to_jsonl(std::slice::from_ref(&r))).unwrap()[0], r);
    }

    #[test]
    fn bad_line_is_located() {
        let err = parse_jsonl("\n{\"nope\":1}\n").unwrap_err();
        assert_eq!(err.line, 2);
    }

    struct Broken;
    impl Write for Broken {
        fn write(&mut self, _: &[u8]) -> io::Result<usize> {
            Err(io::Error::other("disk full"))
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn sink_failure_keeps_records() {
        let mut sink = Broken;
        let mut log = EventLog::new(Some(&mut sink));
        let rec = |seq| LogRecord {
            t: 0,
            seq,
            node: None,
            detail: LogDetail::LinkState {
                link: "x".into(),
                up: true,
            },
        };
        log.push(rec(0));
        log.push(rec(1));
        assert!(log.failure.is_some());
        assert_eq!(log.records.len(), 2);
    }
}
