use std::collections::BTreeSet;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{DatumId, PassTag, Priority, QueueEntry, QueueError, StoreQueue};
use crate::fragproto::{encode_frame, fragment_datum, FragError, FragmentHeader};
use crate::linkmodel::{EnergyLedger, RadioProfile};
use crate::orbit::{OrbitEphemeris, PassWindow};
use crate::{Millis, NodeId};

/// Vehicle position and velocity report.
pub const DEFAULT_DATUM_KIND: &str = "EstimatedState";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub struct ResendPolicy {
    /// Re-enqueue a fully sent datum this long after its last fragment left.
    pub after_ms: Millis,
    pub max_attempts: u32,
}

/// Resolved configuration of the on-board SatComms task.
#[derive(Clone, Debug, PartialEq)]
pub struct SatCommsConfig {
    pub transmit_when_possible: bool,
    pub accepted_kinds: BTreeSet<String>,
    /// Satellite the task tracks. `None` until configured.
    pub ephemeris: Option<OrbitEphemeris>,
    /// When false the task transmits regardless of visibility (bench setups).
    pub gate_on_visibility: bool,
    pub radio: RadioProfile,
    pub destination: NodeId,
    pub resend: Option<ResendPolicy>,
}

/// Uplink slot imposed by a multi-vehicle scheduler for one window.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SlotGate {
    #[default]
    Unscheduled,
    Slot { window: PassWindow, start: Millis, end: Millis },
    NoSlot { window: PassWindow },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TxCopy {
    pub start: Millis,
    pub end: Millis,
}

/// One fragment sent as back-to-back redundant copies.
#[derive(Clone, Debug, PartialEq)]
pub struct Transmission {
    pub datum: DatumId,
    pub header: FragmentHeader,
    pub wire: Vec<u8>,
    pub copies: Vec<TxCopy>,
    pub pass: Option<PassTag>,
    pub last_fragment: bool,
    pub idle_ms: Millis,
    pub energy_j: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enqueued {
    pub datum: DatumId,
    pub msg_id: u16,
    pub fragments: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EnqueueError {
    #[error("datum kind {0:?} not accepted")]
    KindFiltered(String),
    #[error(transparent)]
    QueueFull(#[from] QueueError),
    #[error(transparent)]
    Fragmentation(#[from] FragError),
}

/// SatComms task state of one vehicle.
#[derive(Clone, Debug)]
pub struct SatComms {
    pub node: NodeId,
    pub config: SatCommsConfig,
    pub queue: StoreQueue,
    pub active: bool,
    pub slot: SlotGate,
    pub energy: EnergyLedger,
    next_seq: u32,
    next_msg_id: u16,
    busy_until: Millis,
    accounted_until: Millis,
}

impl SatComms {
    pub fn new(node: NodeId, config: SatCommsConfig, queue_capacity_bytes: usize) -> Self {
        SatComms {
            node,
            config,
            queue: StoreQueue::new(queue_capacity_bytes),
            active: true,
            slot: SlotGate::Unscheduled,
            energy: EnergyLedger::default(),
            next_seq: 0,
            next_msg_id: 0,
            busy_until: 0,
            accounted_until: 0,
        }
    }

    pub fn busy_until(&self) -> Millis {
        self.busy_until
    }

    pub fn is_idle(&self, now: Millis) -> bool {
        now >= self.busy_until
    }

    /// Allocates the next datum id without enqueueing anything.
    pub fn allocate_datum(&mut self) -> DatumId {
        let id = DatumId {
            node: self.node,
            seq: self.next_seq,
        };
        self.next_seq += 1;
        id
    }

    /// Fragments and queues a datum. The id is allocated even on rejection so
    /// the caller can account for it.
    pub fn enqueue_datum(
        &mut self,
        kind: &str,
        data: &[u8],
        priority: Priority,
        now: Millis,
    ) -> (DatumId, Result<Enqueued, EnqueueError>) {
        let id = self.allocate_datum();
        if !self.config.accepted_kinds.contains(kind) {
            return (id, Err(EnqueueError::KindFiltered(kind.to_string())));
        }
        (id, self.push(id, data, priority, now))
    }

    /// Queues an already-identified datum again under a fresh message id.
    pub fn requeue(
        &mut self,
        id: DatumId,
        data: &[u8],
        priority: Priority,
        now: Millis,
    ) -> Result<Enqueued, EnqueueError> {
        self.push(id, data, priority, now)
    }

    fn push(&mut self, id: DatumId, data: &[u8], priority: Priority, now: Millis) -> Result<Enqueued, EnqueueError> {
        let msg_id = self.next_msg_id;
        let fragments = fragment_datum(self.node, msg_id, data, self.config.radio.frame_bytes as usize)?;
        let n = fragments.len();
        self.queue.push(QueueEntry {
            datum: id,
            priority,
            enqueued_at: now,
            fragments: fragments.into(),
        })?;
        self.next_msg_id = self.next_msg_id.wrapping_add(1);
        Ok(Enqueued {
            datum: id,
            msg_id,
            fragments: n,
        })
    }

    /// Window the task is currently allowed to transmit in, if gated.
    pub fn current_window(&self, now: Millis) -> Option<PassWindow> {
        let eph = self.config.ephemeris.as_ref()?;
        eph.is_visible(now).then(|| eph.next_window(now))
    }

    /// Latest instant a transmission starting now may end, or `None` when
    /// transmission is not allowed at all.
    fn transmit_deadline(&self, now: Millis) -> Option<(Option<Millis>, Option<PassTag>)> {
        let mut deadline = None;
        let mut pass = None;
        let window = if self.config.gate_on_visibility {
            let w = self.current_window(now)?;
            deadline = Some(w.end);
            pass = Some(PassTag {
                satellite: w.satellite_id,
                window_start: w.start,
            });
            Some(w)
        } else {
            None
        };
        match self.slot {
            SlotGate::Unscheduled => {}
            SlotGate::Slot { window: sw, start, end } => {
                if window.is_none_or(|w| w == sw) {
                    if now < start || now >= end {
                        return None;
                    }
                    deadline = Some(deadline.map_or(end, |d: Millis| d.min(end)));
                }
            }
            SlotGate::NoSlot { window: sw } => {
                if window.is_none_or(|w| w == sw) {
                    return None;
                }
            }
        }
        Some((deadline, pass))
    }

    /// Decides whether to start the next fragment now. Fragments are only
    /// started when every redundant copy finishes before the window (or
    /// slot) closes.
    pub fn satcomms_tick(&mut self, now: Millis) -> Option<Transmission> {
        if !self.active || !self.config.transmit_when_possible || !self.is_idle(now) {
            return None;
        }
        self.queue.peek()?;
        let (deadline, pass) = self.transmit_deadline(now)?;
        let copy_time = self.config.radio.effective_frame_airtime();
        let group = self.config.radio.fragment_airtime();
        if deadline.is_some_and(|d| now + group > d) {
            return None;
        }
        let (datum, fragment, last_fragment) = self.queue.pop_fragment()?;
        let wire = encode_frame(&fragment, self.config.radio.frame_bytes as usize)
            .expect("fragments from fragment_datum always encode");
        let copies = (0..self.config.radio.redundancy as Millis)
            .map(|i| TxCopy {
                start: now + i * copy_time,
                end: now + (i + 1) * copy_time,
            })
            .collect();
        let idle_ms = (now - self.accounted_until).max(0);
        let energy_j = self.energy.accrue(&self.config.radio, group, idle_ms);
        self.accounted_until = now + group;
        self.busy_until = now + group;
        Some(Transmission {
            datum,
            header: fragment.header,
            wire,
            copies,
            pass,
            last_fragment,
            idle_ms,
            energy_j,
        })
    }

    /// Accrues standby time up to `now`; returns (idle ms, joules) added.
    pub fn finalize_energy(&mut self, now: Millis) -> (Millis, f64) {
        let idle = (now - self.accounted_until).max(0);
        let j = self.energy.accrue(&self.config.radio, 0, idle);
        self.accounted_until = self.accounted_until.max(now);
        (idle, j)
    }

    pub fn queued_bytes(&self) -> usize {
        self.queue.stored_bytes()
    }

    pub fn queued_fragments(&self) -> usize {
        self.queue.fragment_count()
    }
}
