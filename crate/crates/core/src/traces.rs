//! In-memory execution traces. Scenario runs and tests assert against these;
//! live serving leaves tracing off and pays nothing but an atomic load per
//! event.
//!
//! Interval bookkeeping uses a global monotonic sequence number in addition
//! to clock time: under a virtual clock an entire request can begin and end
//! at the same millisecond, and only the sequence ordering can prove that a
//! controller session and a client transmission did not overlap.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::analyzer::{ActivityRecord, AlarmRecord};
use crate::controller::{CountermeasureRecord, CrpReport, FailureReport, VerdictTrace};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SpanKind {
    /// Controller session: per-request verification.
    Agreement,
    /// Controller session: periodic scan.
    Crp,
    /// Response bytes flowing to a client.
    Transmit,
}

#[derive(Clone, Copy, Debug)]
pub struct Span {
    pub kind: SpanKind,
    pub start_seq: u64,
    pub end_seq: u64,
    pub start_ms: u64,
    pub end_ms: u64,
}

impl Span {
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start_seq < other.end_seq && other.start_seq < self.end_seq
    }
}

/// Open span handle; close it with [`TraceHandle::end_span`].
#[derive(Clone, Copy, Debug)]
pub struct SpanToken {
    kind: SpanKind,
    start_seq: u64,
    start_ms: u64,
}

#[derive(Clone, Debug)]
pub struct HealEvent {
    pub replica_id: u16,
    pub page: String,
    pub at_ms: u64,
    /// True when bytes actually changed; an already-clean heal attempt is recorded as false.
    pub changed: bool,
    pub context: &'static str,
}

#[derive(Clone, Debug)]
pub struct RebootEvent {
    pub replicas: Vec<u16>,
    pub reason: String,
    pub at_ms: u64,
}

#[derive(Clone, Debug)]
pub struct AlertEvent {
    pub replica_id: u16,
    pub kind: String,
    pub level_after: u32,
    pub at_ms: u64,
}

#[derive(Clone, Default, Debug)]
pub struct TraceData {
    pub verdicts: Vec<VerdictTrace>,
    pub activities: Vec<ActivityRecord>,
    pub alarms: Vec<AlarmRecord>,
    pub reports: Vec<FailureReport>,
    pub heals: Vec<HealEvent>,
    pub reboots: Vec<RebootEvent>,
    pub alerts: Vec<AlertEvent>,
    pub countermeasures: Vec<CountermeasureRecord>,
    pub crp_reports: Vec<CrpReport>,
    pub spans: Vec<Span>,
}

impl TraceData {
    pub fn spans_of(&self, kind: SpanKind) -> Vec<Span> {
        self.spans
            .iter()
            .copied()
            .filter(|s| s.kind == kind)
            .collect()
    }

    pub fn controller_spans(&self) -> Vec<Span> {
        self.spans
            .iter()
            .copied()
            .filter(|s| matches!(s.kind, SpanKind::Agreement | SpanKind::Crp))
            .collect()
    }

    /// Heal events that actually changed bytes.
    pub fn heal_count(&self) -> u64 {
        self.heals.iter().filter(|h| h.changed).count() as u64
    }

    pub fn reboot_count(&self) -> u64 {
        self.reboots.len() as u64
    }
}

struct TraceShared {
    enabled: AtomicBool,
    seq: AtomicU64,
    data: Mutex<TraceData>,
}

#[derive(Clone)]
pub struct TraceHandle(Arc<TraceShared>);

impl TraceHandle {
    pub fn new(enabled: bool) -> Self {
        TraceHandle(Arc::new(TraceShared {
            enabled: AtomicBool::new(enabled),
            seq: AtomicU64::new(0),
            data: Mutex::new(TraceData::default()),
        }))
    }

    pub fn enabled(&self) -> bool {
        self.0.enabled.load(Ordering::Relaxed)
    }

    pub fn set_enabled(&self, enabled: bool) {
        self.0.enabled.store(enabled, Ordering::Relaxed);
    }

    fn next_seq(&self) -> u64 {
        self.0.seq.fetch_add(1, Ordering::SeqCst)
    }

    pub fn begin_span(&self, kind: SpanKind, now_ms: u64) -> SpanToken {
        SpanToken {
            kind,
            start_seq: self.next_seq(),
            start_ms: now_ms,
        }
    }

    pub fn end_span(&self, token: SpanToken, now_ms: u64) {
        let end_seq = self.next_seq();
        if !self.enabled() {
            return;
        }
        self.record(|d| {
            d.spans.push(Span {
                kind: token.kind,
                start_seq: token.start_seq,
                end_seq,
                start_ms: token.start_ms,
                end_ms: now_ms,
            })
        });
    }

    pub fn record(&self, f: impl FnOnce(&mut TraceData)) {
        if !self.enabled() {
            return;
        }
        let mut data = self.0.data.lock().unwrap();
        f(&mut data);
    }

    pub fn snapshot(&self) -> TraceData {
        self.0.data.lock().unwrap().clone()
    }

    pub fn clear(&self) {
        *self.0.data.lock().unwrap() = TraceData::default();
    }
}
