//! The virtual controller: per-request verification across replicas with
//! healing and reboot fallback, the periodic change-and-response scan, the
//! alert-level trust machine, windowed failure-rate alarms, primary
//! sub-server selection, and the intrusion-manager countermeasure flow.
//!
//! The controller is a single logical actor. At most one of {verification
//! pass, scan} runs at a time; the gateway's gate guarantees that controller
//! sessions never overlap response transmission. All time is read from an
//! injectable clock so every scheduling path is testable without waiting.

pub mod config;
pub mod trust;
pub mod verdict;

pub use config::{alert_kinds, ControllerConfig};
pub use trust::{priority_for, state_for_level, Priority, ReplicaTrust, TrustState};
pub use verdict::{
    assess_failure_rate, tier_for_rate, FailureReport, ReplicaCheck, ServedBy, VerdictTrace,
};

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use crate::analyzer::{
    to_bp, ActivityRecord, AlarmRecord, AlarmSubject, AlarmTier, LogSet, ServeAction,
};
use crate::clock::Clock;
use crate::crypto::{md5_digest, AesKey128};
use crate::error::{CdsError, Result};
use crate::hashstore::{GoldenStore, HashStore, PagePath, TYPES_MANIFEST};
use crate::replicas::{ReplicaId, ReplicaSet};
use crate::traces::{AlertEvent, HealEvent, RebootEvent, SpanKind, TraceHandle};

/// Outcome of the intrusion-manager flow for one corruption alert.
#[derive(Clone, Debug)]
pub struct CountermeasureRecord {
    pub replica_id: ReplicaId,
    pub pages_checked: u32,
    pub mismatched: u32,
    /// True when the vote confirmed corruption; false demotes to suspected.
    pub confirmed: bool,
    pub countermeasures: Vec<String>,
    pub at_ms: u64,
}

#[derive(Clone, Debug)]
pub struct CrpReplicaReport {
    pub replica_id: ReplicaId,
    pub pages_checked: u32,
    pub healed_pages: Vec<String>,
    pub rebooted: bool,
}

/// One scan's outcome across all replicas.
#[derive(Clone, Debug)]
pub struct CrpReport {
    pub at_ms: u64,
    pub per_replica: Vec<CrpReplicaReport>,
}

impl CrpReport {
    pub fn pages_checked(&self) -> u32 {
        self.per_replica.iter().map(|r| r.pages_checked).sum()
    }

    pub fn healed_count(&self) -> u32 {
        self.per_replica
            .iter()
            .map(|r| r.healed_pages.len() as u32)
            .sum()
    }
}

/// A handled exchange waiting for its response to be transmitted; the
/// audit row is completed and appended once the session duration is known.
pub struct PendingExchange {
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: Option<String>,
    pub served_by: Option<ServedBy>,
    pub verdict: Option<VerdictTrace>,
    record: ActivityRecord,
}

pub struct ControllerPaths {
    pub store: PathBuf,
    pub golden: PathBuf,
    pub data: PathBuf,
}

struct WindowState {
    verdicts: Vec<VerdictTrace>,
    attacks: u32,
}

struct CrpState {
    last_request_ms: u64,
    last_scan_ms: u64,
    /// Replicas whose confirmed corruption halved the scan period; the full
    /// period returns once each scans fully clean while trustworthy again.
    regime_pending: BTreeSet<u16>,
}

pub struct Controller {
    config: ControllerConfig,
    store: HashStore,
    golden: GoldenStore,
    replicas: ReplicaSet,
    store_key: AesKey128,
    trust: Vec<ReplicaTrust>,
    clock: Arc<dyn Clock>,
    traces: TraceHandle,
    logs: LogSet,
    window: WindowState,
    crp: CrpState,
}

impl Controller {
    /// Assemble a controller over a provisioned store. Fails fast on a wrong
    /// store key, a replica-count mismatch, or a golden tree that no longer
    /// covers the store's pages.
    pub fn open(
        paths: &ControllerPaths,
        config: ControllerConfig,
        store_key: AesKey128,
        clock: Arc<dyn Clock>,
        traces: TraceHandle,
    ) -> Result<Self> {
        config.validate()?;
        let store = HashStore::open(&paths.store)?;
        if md5_digest(store_key.key_bytes()) != store.manifest().key_fingerprint {
            return Err(CdsError::KeyMismatch);
        }
        let replica_count = store.manifest().replica_count;
        if let Some(expected) = config.replicas {
            if expected != replica_count {
                return Err(CdsError::Config(format!(
                    "config expects {expected} replicas but the store was provisioned with {replica_count}"
                )));
            }
        }
        let golden = GoldenStore::load(&paths.golden, &paths.data.join(TYPES_MANIFEST))?;
        for page in store.pages() {
            if !golden.contains(&page) {
                return Err(CdsError::Config(format!(
                    "golden store is out of sync: no entry for {}",
                    page.as_str()
                )));
            }
        }
        let replicas = ReplicaSet::open(&paths.data, replica_count)?;
        let logs = LogSet::open(&paths.data)?;
        let now = clock.now_ms();
        let trust = (1..=replica_count)
            .map(|id| ReplicaTrust::from_level(ReplicaId(id), 0, config.tc))
            .collect();
        Ok(Controller {
            config,
            store,
            golden,
            replicas,
            store_key,
            trust,
            clock,
            traces,
            logs,
            window: WindowState {
                verdicts: Vec::new(),
                attacks: 0,
            },
            crp: CrpState {
                last_request_ms: now,
                last_scan_ms: now,
                regime_pending: BTreeSet::new(),
            },
        })
    }

    // ---- accessors -------------------------------------------------------

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn replica_count(&self) -> u16 {
        self.replicas.count()
    }

    pub fn trust_table(&self) -> &[ReplicaTrust] {
        &self.trust
    }

    pub fn trust(&self, id: ReplicaId) -> Result<ReplicaTrust> {
        self.trust
            .get((id.0 as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| CdsError::Validation(format!("no replica {id}")))
    }

    pub fn replicas(&self) -> &ReplicaSet {
        &self.replicas
    }

    pub fn store(&self) -> &HashStore {
        &self.store
    }

    pub fn golden(&self) -> &GoldenStore {
        &self.golden
    }

    pub fn store_key(&self) -> &AesKey128 {
        &self.store_key
    }

    pub fn now_ms(&self) -> u64 {
        self.clock.now_ms()
    }

    pub fn analysis_disabled(&self) -> bool {
        self.logs.analysis_disabled
    }

    /// Operations and test hook: pin a replica's alert level directly.
    pub fn force_alert_level(&mut self, id: ReplicaId, level: u32) -> Result<()> {
        let idx = self.trust_index(id)?;
        self.trust[idx] = ReplicaTrust::from_level(id, level, self.config.tc);
        Ok(())
    }

    pub fn set_isolated(&mut self, id: ReplicaId, isolated: bool) -> Result<()> {
        self.replicas.set_isolated(id, isolated)
    }

    pub fn set_load_counter(&mut self, id: ReplicaId, load: u64) -> Result<()> {
        self.replicas.set_load_counter(id, load)
    }

    fn trust_index(&self, id: ReplicaId) -> Result<usize> {
        let idx = (id.0 as usize).wrapping_sub(1);
        if idx < self.trust.len() {
            Ok(idx)
        } else {
            Err(CdsError::Validation(format!("no replica {id}")))
        }
    }

    // ---- request path ----------------------------------------------------

    /// Handle one GET while the gateway holds the gate. Returns the response
    /// material plus the audit row to finalize after transmission.
    pub fn handle_get(&mut self, raw_target: &str) -> PendingExchange {
        let at_ms = self.clock.now_ms();
        self.crp.last_request_ms = at_ms;

        let page = match PagePath::from_request(raw_target) {
            Ok(p) => p,
            Err(_) => return self.pending_unverified(raw_target, 404, true, at_ms),
        };
        if !self.store.contains_page(&page) {
            // unknown page: plain 404, no alert
            return self.pending_unverified(page.as_str(), 404, true, at_ms);
        }
        match self.run_agreement(&page) {
            Ok((body, content_type, verdict)) => {
                let record = self.verified_record(&page, &content_type, &verdict, 200, at_ms);
                PendingExchange {
                    status: 200,
                    body,
                    content_type: Some(content_type),
                    served_by: Some(verdict.served_by),
                    verdict: Some(verdict),
                    record,
                }
            }
            Err(CdsError::NoReplicaAvailable) => {
                self.pending_unverified(page.as_str(), 503, true, at_ms)
            }
            Err(e) => {
                eprintln!("cds: internal failure serving {}: {e}", page.as_str());
                self.pending_unverified(page.as_str(), 500, true, at_ms)
            }
        }
    }

    /// Audit row for an exchange that never reached verification (bad
    /// method, unknown page, overflow, internal failure).
    pub fn pending_unverified(
        &mut self,
        target: &str,
        status: u16,
        request_ok: bool,
        at_ms: u64,
    ) -> PendingExchange {
        self.crp.last_request_ms = self.crp.last_request_ms.max(at_ms);
        let page: String = target
            .chars()
            .map(|c| if c.is_control() { ' ' } else { c })
            .collect();
        let (requests, failures, attacks) = self.window_stats();
        let record = ActivityRecord {
            at_ms,
            content_type: None,
            page,
            session_ms: 0,
            request_ok,
            response_status: status,
            intrusion: false,
            infected_replica: None,
            infected_page: None,
            attack_frequency: attacks as u64,
            reliability_bp: reliability_bp(failures, requests),
            replica_count: self.replicas.count(),
            flags: None,
            failure_percent: None,
            action: ServeAction::None,
        };
        PendingExchange {
            status,
            body: Vec::new(),
            content_type: None,
            served_by: None,
            verdict: None,
            record,
        }
    }

    /// Complete an exchange once its last byte went out: stamp the session
    /// duration and append the audit row.
    pub fn finalize_exchange(&mut self, mut pending: PendingExchange, session_ms: u64) {
        pending.record.session_ms = session_ms;
        self.logs.append_activity(&pending.record);
        let record = pending.record;
        self.traces.record(|d| d.activities.push(record));
    }

    fn verified_record(
        &mut self,
        page: &PagePath,
        content_type: &str,
        verdict: &VerdictTrace,
        status: u16,
        at_ms: u64,
    ) -> ActivityRecord {
        let replica_count = self.replicas.count();
        // window bookkeeping includes this request before the row is built
        self.window.verdicts.push(verdict.clone());
        if verdict.any_mismatch() {
            self.window.attacks += 1;
        }
        let (requests, failures, attacks) = self.window_stats();
        let record = ActivityRecord {
            at_ms,
            content_type: Some(content_type.to_string()),
            page: page.as_str().to_string(),
            session_ms: 0,
            request_ok: true,
            response_status: status,
            intrusion: verdict.any_mismatch(),
            infected_replica: verdict.first_mismatch().map(|r| r.0),
            infected_page: verdict.any_mismatch().then(|| page.as_str().to_string()),
            attack_frequency: attacks as u64,
            reliability_bp: reliability_bp(failures, requests),
            replica_count,
            flags: Some(verdict.flags(replica_count)),
            failure_percent: Some(verdict.failure_percent(replica_count)),
            action: match verdict.served_by {
                ServedBy::Replica(id) => ServeAction::SubServer(id.0),
                ServedBy::Reboot => ServeAction::Reboot,
            },
        };
        if self.window.verdicts.len() as u32 >= self.config.window {
            self.close_window();
        }
        record
    }

    fn window_stats(&self) -> (u32, u32, u32) {
        let requests = self.window.verdicts.len() as u32;
        let failures = self
            .window
            .verdicts
            .iter()
            .filter(|v| v.primary_failed())
            .count() as u32;
        (requests, failures, self.window.attacks)
    }

    /// Assess the completed window, persist the report, raise the operator
    /// alarm for the beep tiers, and start a fresh window.
    fn close_window(&mut self) {
        let report = assess_failure_rate(
            &self.window.verdicts,
            self.config.th_low,
            self.config.th_high,
        );
        let now = self.clock.now_ms();
        self.logs.append_report_row(
            now,
            report.window_start_ms,
            report.window_end_ms,
            report.requests,
            report.failures,
            report.failure_rate_bp(),
            report.tier,
        );
        self.traces.record(|d| d.reports.push(report));
        if report.tier != AlarmTier::LogOnly {
            let alarm = AlarmRecord {
                raised_at_ms: now,
                tier: report.tier,
                failure_rate_bp: report.failure_rate_bp(),
                subject: AlarmSubject::System,
                action_taken: match report.tier {
                    AlarmTier::Beep => "beep-alert".to_string(),
                    _ => "higher-beep-alert".to_string(),
                },
            };
            self.logs.append_alarm(&alarm);
            self.traces.record(|d| d.alarms.push(alarm.clone()));
        }
        self.window.verdicts.clear();
        self.window.attacks = 0;
    }

    /// Assess an arbitrary non-empty verdict window against the configured
    /// thresholds.
    pub fn assess_window(&self, verdicts: &[VerdictTrace]) -> FailureReport {
        assess_failure_rate(verdicts, self.config.th_low, self.config.th_high)
    }

    // ---- verification ----------------------------------------------------

    /// Per-request verification: walk replicas in selection order, serve the
    /// first whose bytes hash to the stored expectation, heal every earlier
    /// mismatch, and fall back to a full reboot plus golden serve when no
    /// replica matches.
    pub fn run_agreement(&mut self, page: &PagePath) -> Result<(Vec<u8>, String, VerdictTrace)> {
        let started_ms = self.clock.now_ms();
        let span = self.traces.begin_span(SpanKind::Agreement, started_ms);
        let result = self.agreement_inner(page, started_ms);
        self.traces.end_span(span, self.clock.now_ms());
        result
    }

    fn agreement_inner(
        &mut self,
        page: &PagePath,
        started_ms: u64,
    ) -> Result<(Vec<u8>, String, VerdictTrace)> {
        let order = self.select_primary()?;
        let mut checks: Vec<ReplicaCheck> = Vec::new();
        let mut failed: Vec<ReplicaId> = Vec::new();
        let mut winner: Option<(ReplicaId, Vec<u8>)> = None;

        for id in order {
            match self.replicas.read_page(id, page) {
                Ok(bytes) => {
                    let expected = self.store.lookup_expected(page, id, &self.store_key)?;
                    if md5_digest(&bytes) == expected {
                        checks.push(ReplicaCheck {
                            replica_id: id,
                            matched: true,
                        });
                        winner = Some((id, bytes));
                        break;
                    }
                    checks.push(ReplicaCheck {
                        replica_id: id,
                        matched: false,
                    });
                    failed.push(id);
                    self.raise_alert(id, alert_kinds::HASH_MISMATCH)?;
                }
                Err(CdsError::PageMissing { .. }) => {
                    checks.push(ReplicaCheck {
                        replica_id: id,
                        matched: false,
                    });
                    failed.push(id);
                    self.raise_alert(id, alert_kinds::PAGE_MISSING)?;
                }
                Err(e) => return Err(e),
            }
        }

        let (body, content_type, served_by, healed) = match winner {
            Some((id, bytes)) => {
                // heal every replica that failed ahead of the server
                let mut healed = Vec::new();
                for fid in &failed {
                    self.heal_with_escalation(*fid, page, "agreement");
                    healed.push(*fid);
                }
                self.replicas.increment_load(id)?;
                let content_type = self
                    .golden
                    .content_type(page)
                    .unwrap_or("application/octet-stream")
                    .to_string();
                (bytes, content_type, ServedBy::Replica(id), healed)
            }
            None => {
                // every replica failed: reboot them all, serve the golden copy
                self.reboot_all("no replica matched the stored hash code");
                let (bytes, content_type) = self.golden.bytes(page)?;
                (bytes, content_type, ServedBy::Reboot, Vec::new())
            }
        };

        let now = self.clock.now_ms();
        let verdict = VerdictTrace {
            page_path: page.as_str().to_string(),
            checks,
            served_by,
            healed,
            duration_ms: now.saturating_sub(started_ms),
            at_ms: started_ms,
        };
        let v = verdict.clone();
        self.traces.record(move |d| d.verdicts.push(v));
        Ok((body, content_type, verdict))
    }

    /// Benchmark-only bypass: serve the primary replica's bytes without hash
    /// verification. Never used on the public path; it exists so the latency
    /// harness can report verification overhead.
    pub fn serve_unverified(&mut self, raw_target: &str) -> Result<(Vec<u8>, String)> {
        let page = PagePath::from_request(raw_target)?;
        if !self.store.contains_page(&page) {
            return Err(CdsError::RecordMissing {
                page_path: page.as_str().to_string(),
                replica_id: None,
            });
        }
        let order = self.select_primary()?;
        let bytes = self.replicas.read_page(order[0], &page)?;
        let content_type = self
            .golden
            .content_type(&page)
            .unwrap_or("application/octet-stream")
            .to_string();
        Ok((bytes, content_type))
    }

    // ---- replica selection -----------------------------------------------

    /// Replicas in verification order: priority first (trustworthy before
    /// suspected before corrupted), then ascending load, then ascending id.
    /// Isolated replicas are excluded entirely.
    pub fn select_primary(&self) -> Result<Vec<ReplicaId>> {
        let mut live: Vec<(Priority, u64, u16)> = self
            .replicas
            .handles()
            .iter()
            .filter(|h| !h.isolated)
            .map(|h| {
                let trust = self.trust[(h.replica_id.0 - 1) as usize];
                (trust.priority, h.load_counter, h.replica_id.0)
            })
            .collect();
        if live.is_empty() {
            return Err(CdsError::NoReplicaAvailable);
        }
        live.sort();
        Ok(live.into_iter().map(|(_, _, id)| ReplicaId(id)).collect())
    }

    // ---- trust machine ----------------------------------------------------

    /// Add the alert's weight to the replica's level and recompute its state.
    /// Crossing the corruption threshold triggers the intrusion manager
    /// immediately, so the returned trust reflects any reboot or demotion.
    pub fn raise_alert(&mut self, id: ReplicaId, kind: &str) -> Result<ReplicaTrust> {
        let weight = self.config.weight(kind)?;
        let idx = self.trust_index(id)?;
        let level = self.trust[idx].alert_level.saturating_add(weight);
        self.trust[idx] = ReplicaTrust::from_level(id, level, self.config.tc);
        let at_ms = self.clock.now_ms();
        let event = AlertEvent {
            replica_id: id.0,
            kind: kind.to_string(),
            level_after: level,
            at_ms,
        };
        self.traces.record(move |d| d.alerts.push(event));
        if self.trust[idx].state == TrustState::Corrupted {
            self.intrusion_manager(id)?;
        }
        Ok(self.trust[idx])
    }

    /// Countermeasure flow for a replica just marked corrupted: re-verify
    /// every page of the replica (the vote), and on a confirming majority
    /// isolate it, halve the scan period, reboot it, and raise the alarm.
    /// A false alarm demotes the replica back to suspected at the threshold.
    pub fn intrusion_manager(&mut self, id: ReplicaId) -> Result<CountermeasureRecord> {
        let at_ms = self.clock.now_ms();
        let pages: Vec<PagePath> = self.store.pages().collect();
        let mut mismatched = 0u32;
        for page in &pages {
            let expected = self.store.lookup_expected(page, id, &self.store_key)?;
            let ok = match self.replicas.read_page(id, page) {
                Ok(bytes) => md5_digest(&bytes) == expected,
                Err(_) => false,
            };
            if !ok {
                mismatched += 1;
            }
        }
        let pages_checked = pages.len() as u32;
        let confirmed = (mismatched as u64) * 2 > pages_checked as u64;

        let mut countermeasures = Vec::new();
        if confirmed {
            countermeasures.push("isolate".to_string());
            countermeasures.push("reboot".to_string());
            self.replicas.set_isolated(id, true)?;
            self.crp.regime_pending.insert(id.0);
            // reboot clears isolation and resets trust to trustworthy
            let _ = self.reboot_replica_logged(id, "intrusion countermeasure", true);
            let alarm = AlarmRecord {
                raised_at_ms: self.clock.now_ms(),
                tier: AlarmTier::HighBeep,
                failure_rate_bp: if pages_checked == 0 {
                    0
                } else {
                    to_bp(mismatched as f64 / pages_checked as f64)
                },
                subject: AlarmSubject::Replica(id.0),
                action_taken: "isolated and rebooted; scan period halved".to_string(),
            };
            self.logs.append_alarm(&alarm);
            self.traces.record(|d| d.alarms.push(alarm.clone()));
        } else {
            // false alarm: back to suspected, parked at the threshold
            let idx = self.trust_index(id)?;
            self.trust[idx] = ReplicaTrust::from_level(id, self.config.tc, self.config.tc);
        }

        let record = CountermeasureRecord {
            replica_id: id,
            pages_checked,
            mismatched,
            confirmed,
            countermeasures,
            at_ms,
        };
        let r = record.clone();
        self.traces.record(move |d| d.countermeasures.push(r));
        Ok(record)
    }

    // ---- healing and reboot ------------------------------------------------

    fn heal_with_escalation(&mut self, id: ReplicaId, page: &PagePath, context: &'static str) {
        match self.replicas.heal_page(id, page, &self.golden) {
            Ok(changed) => {
                let event = HealEvent {
                    replica_id: id.0,
                    page: page.as_str().to_string(),
                    at_ms: self.clock.now_ms(),
                    changed,
                    context,
                };
                self.traces.record(move |d| d.heals.push(event));
            }
            Err(e) => {
                eprintln!("cds: {e}; escalating to reboot");
                // the alert itself may already have rebooted via the vote
                let trust_after = self
                    .raise_alert(id, alert_kinds::HEAL_FAILED)
                    .unwrap_or_else(|_| ReplicaTrust::from_level(id, 1, self.config.tc));
                if trust_after.state != TrustState::Trustworthy {
                    let _ = self.reboot_replica_logged(id, "heal escalation", true);
                }
            }
        }
    }

    /// Reboot one replica: full re-materialization from golden, trust reset
    /// to trustworthy, and an operational REBOOT row in the activity log.
    /// On failure the replica is isolated and an alarm raised; the server
    /// keeps serving from the remaining replicas.
    pub fn reboot_replica(&mut self, id: ReplicaId) -> Result<()> {
        self.reboot_replica_logged(id, "operator reboot", true)
    }

    fn reboot_replica_logged(&mut self, id: ReplicaId, reason: &str, emit_row: bool) -> Result<()> {
        match self.replicas.reboot_replica(id, &self.golden) {
            Ok(()) => {
                let idx = self.trust_index(id)?;
                self.trust[idx] = ReplicaTrust::from_level(id, 0, self.config.tc);
                let event = RebootEvent {
                    replicas: vec![id.0],
                    reason: reason.to_string(),
                    at_ms: self.clock.now_ms(),
                };
                self.traces.record(move |d| d.reboots.push(event));
                if emit_row {
                    self.append_reboot_row(id);
                }
                Ok(())
            }
            Err(e) => {
                let _ = self.replicas.set_isolated(id, true);
                let alarm = AlarmRecord {
                    raised_at_ms: self.clock.now_ms(),
                    tier: AlarmTier::HighBeep,
                    failure_rate_bp: 10000,
                    subject: AlarmSubject::Replica(id.0),
                    action_taken: format!("reboot failed ({e}); replica isolated"),
                };
                self.logs.append_alarm(&alarm);
                self.traces.record(|d| d.alarms.push(alarm.clone()));
                eprintln!("cds: {e}; replica {id} isolated");
                Err(e)
            }
        }
    }

    /// Blanket reboot of every replica, recorded as a single reboot event.
    fn reboot_all(&mut self, reason: &str) {
        let mut rebooted = Vec::new();
        for id in self.replicas.ids() {
            match self.replicas.reboot_replica(id, &self.golden) {
                Ok(()) => {
                    if let Ok(idx) = self.trust_index(id) {
                        self.trust[idx] = ReplicaTrust::from_level(id, 0, self.config.tc);
                    }
                    rebooted.push(id.0);
                }
                Err(e) => {
                    let _ = self.replicas.set_isolated(id, true);
                    eprintln!("cds: {e}; replica {id} isolated");
                }
            }
        }
        let event = RebootEvent {
            replicas: rebooted,
            reason: reason.to_string(),
            at_ms: self.clock.now_ms(),
        };
        self.traces.record(move |d| d.reboots.push(event));
    }

    /// Operational REBOOT row for reboots that happen outside a request
    /// (countermeasures, escalations). Request-path reboots are carried on
    /// the request's own row instead.
    fn append_reboot_row(&mut self, id: ReplicaId) {
        let (requests, failures, attacks) = self.window_stats();
        let record = ActivityRecord {
            at_ms: self.clock.now_ms(),
            content_type: None,
            page: "-".to_string(),
            session_ms: 0,
            request_ok: false,
            response_status: 0,
            intrusion: true,
            infected_replica: Some(id.0),
            infected_page: None,
            attack_frequency: attacks as u64,
            reliability_bp: reliability_bp(failures, requests),
            replica_count: self.replicas.count(),
            flags: None,
            failure_percent: None,
            action: ServeAction::Reboot,
        };
        self.logs.append_activity(&record);
        self.traces.record(|d| d.activities.push(record.clone()));
    }

    // ---- periodic scan -----------------------------------------------------

    pub fn effective_crp_period_ms(&self) -> u64 {
        if self.crp.regime_pending.is_empty() {
            self.config.crp_period_max_ms
        } else {
            (self.config.crp_period_max_ms / 2).max(1)
        }
    }

    pub fn regime_change_active(&self) -> bool {
        !self.crp.regime_pending.is_empty()
    }

    /// True when a scan is due: either traffic has been idle long enough, or
    /// the period bound has elapsed since the last scan.
    pub fn crp_due(&self) -> bool {
        let now = self.clock.now_ms();
        let idle_base = self.crp.last_request_ms.max(self.crp.last_scan_ms);
        now.saturating_sub(idle_base) >= self.config.crp_idle_trigger_ms
            || now.saturating_sub(self.crp.last_scan_ms) >= self.effective_crp_period_ms()
    }

    /// Full-store scan: verify every (page, replica) pair, heal mismatches
    /// immediately, and raise the corresponding alerts. Must run with the
    /// gateway's gate held.
    pub fn run_crp(&mut self) -> Result<CrpReport> {
        let started_ms = self.clock.now_ms();
        let span = self.traces.begin_span(SpanKind::Crp, started_ms);
        let result = self.crp_inner(started_ms);
        self.traces.end_span(span, self.clock.now_ms());
        result
    }

    fn crp_inner(&mut self, started_ms: u64) -> Result<CrpReport> {
        let pages: Vec<PagePath> = self.store.pages().collect();
        let mut per_replica = Vec::new();
        let mut scan_mismatches: Vec<u32> = vec![0; self.replicas.count() as usize + 1];

        for id in self.replicas.ids() {
            let mut healed_pages = Vec::new();
            let mut rebooted = false;
            for page in &pages {
                let expected = self.store.lookup_expected(page, id, &self.store_key)?;
                let read = self.replicas.read_page(id, page);
                let clean = matches!(&read, Ok(bytes) if md5_digest(bytes) == expected);
                if clean {
                    continue;
                }
                scan_mismatches[id.0 as usize] += 1;
                let kind = if read.is_err() {
                    alert_kinds::PAGE_MISSING
                } else {
                    alert_kinds::HASH_MISMATCH
                };
                // heal first, then alert: a vote triggered by the alert must
                // judge the replica by what is still corrupted, not by what
                // this scan already repaired
                match self.replicas.heal_page(id, page, &self.golden) {
                    Ok(changed) => {
                        let event = HealEvent {
                            replica_id: id.0,
                            page: page.as_str().to_string(),
                            at_ms: self.clock.now_ms(),
                            changed,
                            context: "crp",
                        };
                        self.traces.record(move |d| d.heals.push(event));
                        if changed {
                            healed_pages.push(page.as_str().to_string());
                        }
                        let trust_after = self.raise_alert(id, kind)?;
                        if trust_after.state == TrustState::Trustworthy
                            && trust_after.alert_level == 0
                        {
                            rebooted = true;
                        }
                    }
                    Err(e) => {
                        eprintln!("cds: {e}; escalating to reboot");
                        let trust_after = self.raise_alert(id, alert_kinds::HEAL_FAILED)?;
                        if trust_after.state != TrustState::Trustworthy {
                            if self
                                .reboot_replica_logged(id, "heal escalation", true)
                                .is_ok()
                            {
                                rebooted = true;
                            }
                        } else {
                            rebooted = true; // the vote already rebooted it
                        }
                    }
                }
            }
            per_replica.push(CrpReplicaReport {
                replica_id: id,
                pages_checked: pages.len() as u32,
                healed_pages,
                rebooted,
            });
        }

        // restore the full scan period for replicas that scanned fully clean
        let trust = &self.trust;
        self.crp.regime_pending.retain(|&rid| {
            let clean_scan = scan_mismatches[rid as usize] == 0;
            let trustworthy = trust
                .get((rid as usize).wrapping_sub(1))
                .map(|t| t.state == TrustState::Trustworthy)
                .unwrap_or(false);
            !(clean_scan && trustworthy)
        });
        self.crp.last_scan_ms = self.clock.now_ms();

        let report = CrpReport {
            at_ms: started_ms,
            per_replica,
        };
        let r = report.clone();
        self.traces.record(move |d| d.crp_reports.push(r));
        Ok(report)
    }
}

fn reliability_bp(failures: u32, requests: u32) -> u16 {
    if requests == 0 {
        return 10000;
    }
    to_bp(1.0 - failures as f64 / requests as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::VirtualClock;
    use crate::hashstore::provision;
    use std::fs;

    struct Fixture {
        _dir: tempfile::TempDir,
        controller: Controller,
        clock: Arc<VirtualClock>,
        traces: TraceHandle,
        data: PathBuf,
    }

    fn config_for_tests() -> ControllerConfig {
        let mut c = ControllerConfig::default();
        c.window = 10;
        c.crp_idle_trigger_ms = 1_000;
        c.crp_period_max_ms = 10_000;
        c
    }

    fn fixture(files: &[(&str, &[u8])], replicas: u16, config: ControllerConfig) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let golden = dir.path().join("golden");
        fs::create_dir_all(&golden).unwrap();
        for (rel, bytes) in files {
            let p = golden.join(rel);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).unwrap();
            }
            fs::write(p, bytes).unwrap();
        }
        let key = AesKey128::new(*b"unit-test-key-16");
        let store = dir.path().join("store.cdsh");
        let data = dir.path().join("data");
        provision(&golden, replicas, &key, &store, &data).unwrap();
        let clock = Arc::new(VirtualClock::new(0));
        let traces = TraceHandle::new(true);
        let controller = Controller::open(
            &ControllerPaths {
                store,
                golden,
                data: data.clone(),
            },
            config,
            key,
            clock.clone(),
            traces.clone(),
        )
        .unwrap();
        Fixture {
            _dir: dir,
            controller,
            clock,
            traces,
            data,
        }
    }

    fn site() -> Vec<(&'static str, &'static [u8])> {
        vec![
            ("index.html", b"hello world".as_slice()),
            ("about.html", b"about page".as_slice()),
            ("docs/guide.html", b"the guide".as_slice()),
        ]
    }

    fn page(p: &str) -> PagePath {
        PagePath::from_request(p).unwrap()
    }

    fn corrupt(f: &Fixture, replica: u16, rel: &str) {
        let path = f.data.join(format!("replica-{replica}")).join(rel);
        fs::write(path, b"!!corrupted!!").unwrap();
    }

    // ---- selection ----------------------------------------------------

    #[test]
    fn selection_orders_by_load_when_all_trustworthy() {
        let mut f = fixture(&site(), 3, config_for_tests());
        f.controller.set_load_counter(ReplicaId(1), 5).unwrap();
        f.controller.set_load_counter(ReplicaId(2), 2).unwrap();
        f.controller.set_load_counter(ReplicaId(3), 9).unwrap();
        let order = f.controller.select_primary().unwrap();
        assert_eq!(order, vec![ReplicaId(2), ReplicaId(1), ReplicaId(3)]);
    }

    #[test]
    fn selection_puts_suspected_after_trustworthy() {
        let mut f = fixture(&site(), 3, config_for_tests());
        f.controller.force_alert_level(ReplicaId(1), 3).unwrap();
        let order = f.controller.select_primary().unwrap();
        assert_eq!(order, vec![ReplicaId(2), ReplicaId(3), ReplicaId(1)]);
    }

    #[test]
    fn selection_excludes_isolated_and_errors_when_none_left() {
        let mut f = fixture(&site(), 2, config_for_tests());
        f.controller.force_alert_level(ReplicaId(1), 99).unwrap();
        f.controller.set_isolated(ReplicaId(1), true).unwrap();
        assert_eq!(f.controller.select_primary().unwrap(), vec![ReplicaId(2)]);
        f.controller.set_isolated(ReplicaId(2), true).unwrap();
        assert!(matches!(
            f.controller.select_primary(),
            Err(CdsError::NoReplicaAvailable)
        ));
    }

    #[test]
    fn equal_conditions_reduce_to_id_order() {
        let f = fixture(&site(), 5, config_for_tests());
        let order = f.controller.select_primary().unwrap();
        assert_eq!(order, (1..=5).map(ReplicaId).collect::<Vec<_>>());
    }

    // ---- alerts and the trust machine ----------------------------------

    #[test]
    fn alert_arithmetic_moves_to_suspected() {
        let mut f = fixture(&site(), 3, config_for_tests());
        let t = f
            .controller
            .raise_alert(ReplicaId(1), alert_kinds::HASH_MISMATCH)
            .unwrap();
        assert_eq!(t.alert_level, 3);
        assert_eq!(t.state, TrustState::Suspected);
        assert_eq!(t.priority, Priority::Medium);
    }

    #[test]
    fn unknown_alert_kind_is_a_config_error() {
        let mut f = fixture(&site(), 3, config_for_tests());
        assert!(matches!(
            f.controller.raise_alert(ReplicaId(1), "made-up"),
            Err(CdsError::UnknownAlertKind(_))
        ));
    }

    #[test]
    fn crossing_with_real_corruption_reboots_to_trustworthy() {
        let mut f = fixture(&site(), 3, config_for_tests());
        f.controller.force_alert_level(ReplicaId(1), 9).unwrap();
        // replica 1 genuinely corrupted: the vote must confirm
        corrupt(&f, 1, "index.html");
        corrupt(&f, 1, "about.html");
        corrupt(&f, 1, "docs/guide.html");
        let t = f
            .controller
            .raise_alert(ReplicaId(1), alert_kinds::HASH_MISMATCH)
            .unwrap();
        // 9 + 3 = 12 > tc=10 -> corrupted -> confirmed vote -> reboot
        assert_eq!(t.alert_level, 0);
        assert_eq!(t.state, TrustState::Trustworthy);
        let data = f.traces.snapshot();
        assert_eq!(data.reboot_count(), 1);
        assert!(data.countermeasures[0].confirmed);
        assert_eq!(data.countermeasures[0].mismatched, 3);
        assert!(f.controller.regime_change_active());
        // replica got re-materialized
        assert_eq!(
            f.controller
                .replicas()
                .read_page(ReplicaId(1), &page("/index.html"))
                .unwrap(),
            b"hello world"
        );
    }

    #[test]
    fn crossing_without_corruption_demotes_to_suspected() {
        let mut f = fixture(&site(), 3, config_for_tests());
        f.controller.force_alert_level(ReplicaId(2), 9).unwrap();
        let t = f
            .controller
            .raise_alert(ReplicaId(2), alert_kinds::HASH_MISMATCH)
            .unwrap();
        // the vote finds zero mismatches: false alarm, parked at tc
        assert_eq!(t.alert_level, 10);
        assert_eq!(t.state, TrustState::Suspected);
        let data = f.traces.snapshot();
        assert_eq!(data.reboot_count(), 0);
        assert!(!data.countermeasures[0].confirmed);
        assert!(!f.controller.regime_change_active());
    }

    #[test]
    fn unalerted_replica_stays_trustworthy() {
        let f = fixture(&site(), 3, config_for_tests());
        for t in f.controller.trust_table() {
            assert_eq!(t.state, TrustState::Trustworthy);
            assert_eq!(t.alert_level, 0);
        }
    }

    // ---- agreement ------------------------------------------------------

    #[test]
    fn clean_request_serves_first_replica() {
        let mut f = fixture(&site(), 3, config_for_tests());
        let (bytes, ctype, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(bytes, b"hello world");
        assert_eq!(ctype, "text/html");
        assert_eq!(verdict.served_by, ServedBy::Replica(ReplicaId(1)));
        assert_eq!(verdict.flags(3), vec![true, true, true]);
        assert!(verdict.healed.is_empty());
        assert_eq!(
            f.controller
                .replicas()
                .handle(ReplicaId(1))
                .unwrap()
                .load_counter,
            1
        );
    }

    #[test]
    fn corrupted_primary_falls_back_heals_and_alerts() {
        let mut f = fixture(&site(), 3, config_for_tests());
        corrupt(&f, 1, "index.html");
        let (bytes, _, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(bytes, b"hello world");
        assert_eq!(verdict.served_by, ServedBy::Replica(ReplicaId(2)));
        assert_eq!(verdict.healed, vec![ReplicaId(1)]);
        assert_eq!(verdict.flags(3), vec![false, true, true]);
        // healed on disk
        assert_eq!(
            fs::read(f.data.join("replica-1/index.html")).unwrap(),
            b"hello world"
        );
        // one hash-mismatch alert
        assert_eq!(f.controller.trust(ReplicaId(1)).unwrap().alert_level, 3);
        assert_eq!(f.traces.snapshot().heal_count(), 1);
    }

    #[test]
    fn missing_page_counts_as_verification_failure() {
        let mut f = fixture(&site(), 3, config_for_tests());
        fs::remove_file(f.data.join("replica-1/index.html")).unwrap();
        let (_, _, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(verdict.served_by, ServedBy::Replica(ReplicaId(2)));
        // page-missing carries weight 5
        assert_eq!(f.controller.trust(ReplicaId(1)).unwrap().alert_level, 5);
        // file restored by the heal
        assert!(f.data.join("replica-1/index.html").exists());
    }

    #[test]
    fn total_corruption_reboots_and_serves_golden() {
        let mut f = fixture(&site(), 3, config_for_tests());
        for r in 1..=3 {
            corrupt(&f, r, "index.html");
        }
        let (bytes, _, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(bytes, b"hello world");
        assert_eq!(verdict.served_by, ServedBy::Reboot);
        assert_eq!(verdict.flags(3), vec![false, false, false]);
        assert_eq!(verdict.failure_percent(3), 100);
        let data = f.traces.snapshot();
        // one blanket reboot event covering all three replicas
        assert_eq!(data.reboot_count(), 1);
        assert_eq!(data.reboots[0].replicas, vec![1, 2, 3]);
        // trust reset across the board
        for t in f.controller.trust_table() {
            assert_eq!(t.state, TrustState::Trustworthy);
        }
        // everything clean on disk again
        for r in 1..=3 {
            assert_eq!(
                fs::read(f.data.join(format!("replica-{r}/index.html"))).unwrap(),
                b"hello world"
            );
        }
    }

    #[test]
    fn single_replica_deployment_still_recovers() {
        let mut f = fixture(&site(), 1, config_for_tests());
        corrupt(&f, 1, "index.html");
        let (bytes, _, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(bytes, b"hello world");
        assert_eq!(verdict.served_by, ServedBy::Reboot);
        assert_eq!(verdict.flags(1), vec![false]);
    }

    #[test]
    fn handle_get_maps_errors_to_statuses() {
        let mut f = fixture(&site(), 2, config_for_tests());
        assert_eq!(f.controller.handle_get("/index.html").status, 200);
        assert_eq!(f.controller.handle_get("/nope.html").status, 404);
        assert_eq!(f.controller.handle_get("/../etc/passwd").status, 404);
        f.controller.set_isolated(ReplicaId(1), true).unwrap();
        f.controller.set_isolated(ReplicaId(2), true).unwrap();
        assert_eq!(f.controller.handle_get("/index.html").status, 503);
    }

    #[test]
    fn heal_failure_escalates_to_reboot() {
        let mut f = fixture(&site(), 2, config_for_tests());
        // directory squat makes the plain heal fail; reboot scrubs it
        let victim = f.data.join("replica-1/index.html");
        fs::remove_file(&victim).unwrap();
        fs::create_dir(&victim).unwrap();
        let (_, _, verdict) = f.controller.run_agreement(&page("/index.html")).unwrap();
        assert_eq!(verdict.served_by, ServedBy::Replica(ReplicaId(2)));
        assert_eq!(fs::read(&victim).unwrap(), b"hello world");
        let data = f.traces.snapshot();
        assert_eq!(data.reboot_count(), 1);
        assert_eq!(data.reboots[0].replicas, vec![1]);
        // reboot leaves the replica trustworthy
        assert_eq!(
            f.controller.trust(ReplicaId(1)).unwrap().state,
            TrustState::Trustworthy
        );
    }

    // ---- windows and alarms ----------------------------------------------

    #[test]
    fn window_completion_emits_report_and_alarm() {
        let mut f = fixture(&site(), 3, config_for_tests());
        // window=10: one all-corrupt request -> rate 0.1 -> beep
        for r in 1..=3 {
            corrupt(&f, r, "about.html");
        }
        let pending = f.controller.handle_get("/about.html");
        f.controller.finalize_exchange(pending, 0);
        for _ in 0..9 {
            let pending = f.controller.handle_get("/index.html");
            f.controller.finalize_exchange(pending, 0);
        }
        let data = f.traces.snapshot();
        assert_eq!(data.reports.len(), 1);
        let report = data.reports[0];
        assert_eq!(report.requests, 10);
        assert_eq!(report.failures, 1);
        assert_eq!(report.tier, AlarmTier::Beep);
        assert_eq!(data.alarms.len(), 1);
        assert_eq!(data.alarms[0].tier, AlarmTier::Beep);
        assert!(matches!(data.alarms[0].subject, AlarmSubject::System));
    }

    #[test]
    fn clean_window_reports_log_only_without_alarm() {
        let mut f = fixture(&site(), 3, config_for_tests());
        for _ in 0..10 {
            let pending = f.controller.handle_get("/index.html");
            f.controller.finalize_exchange(pending, 0);
        }
        let data = f.traces.snapshot();
        assert_eq!(data.reports.len(), 1);
        assert_eq!(data.reports[0].tier, AlarmTier::LogOnly);
        assert!(data.alarms.is_empty());
    }

    #[test]
    fn activity_rows_carry_window_stats() {
        let mut f = fixture(&site(), 3, config_for_tests());
        for r in 1..=3 {
            corrupt(&f, r, "about.html");
        }
        let pending = f.controller.handle_get("/about.html");
        f.controller.finalize_exchange(pending, 0);
        let pending = f.controller.handle_get("/index.html");
        f.controller.finalize_exchange(pending, 0);
        let data = f.traces.snapshot();
        let rows = &data.activities;
        assert_eq!(rows.len(), 2);
        assert!(rows[0].intrusion);
        assert_eq!(rows[0].attack_frequency, 1);
        assert_eq!(rows[0].reliability_bp, 0); // 1 failure in 1 request
        assert_eq!(rows[0].action, crate::analyzer::ServeAction::Reboot);
        assert!(!rows[1].intrusion);
        assert_eq!(rows[1].attack_frequency, 1);
        assert_eq!(rows[1].reliability_bp, 5000); // 1 failure in 2 requests
    }

    // ---- scan scheduling and the scan itself ------------------------------

    #[test]
    fn crp_triggers_on_idle_and_on_period() {
        let mut f = fixture(&site(), 3, config_for_tests());
        assert!(!f.controller.crp_due());
        // idle trigger at 1000ms of silence
        f.clock.advance_ms(999);
        assert!(!f.controller.crp_due());
        f.clock.advance_ms(1);
        assert!(f.controller.crp_due());
        f.controller.run_crp().unwrap();
        assert!(!f.controller.crp_due());

        // steady traffic holds off the idle trigger until the period cap
        let mut now = f.clock.now_ms();
        loop {
            f.clock.advance_ms(500);
            now += 500;
            let pending = f.controller.handle_get("/index.html");
            f.controller.finalize_exchange(pending, 0);
            if f.controller.crp_due() {
                break;
            }
            assert!(now < 30_000, "period trigger never fired");
        }
    }

    #[test]
    fn crp_heals_everything_and_reports_counts() {
        let mut f = fixture(&site(), 3, config_for_tests());
        corrupt(&f, 3, "index.html");
        corrupt(&f, 3, "about.html");
        let report = f.controller.run_crp().unwrap();
        assert_eq!(report.pages_checked(), 9);
        assert_eq!(report.healed_count(), 2);
        let by_replica = &report.per_replica[2];
        assert_eq!(by_replica.replica_id, ReplicaId(3));
        assert_eq!(by_replica.healed_pages.len(), 2);
        // two alerts of weight 3
        assert_eq!(f.controller.trust(ReplicaId(3)).unwrap().alert_level, 6);
        // clean second scan
        let report = f.controller.run_crp().unwrap();
        assert_eq!(report.healed_count(), 0);
    }

    #[test]
    fn crp_vote_confirms_when_enough_pages_stay_corrupted() {
        // nine pages; four alerts cross tc while five are still corrupted,
        // so the vote confirms and the replica is isolated then rebooted
        let files: Vec<(String, Vec<u8>)> = (0..9)
            .map(|i| (format!("p{i}.html"), format!("content {i}").into_bytes()))
            .collect();
        let refs: Vec<(&str, &[u8])> = files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .collect();
        let mut f = fixture(&refs, 2, config_for_tests());
        for (name, _) in &files {
            corrupt(&f, 1, name);
        }
        let report = f.controller.run_crp().unwrap();
        let data = f.traces.snapshot();
        assert_eq!(data.reboot_count(), 1);
        assert!(data.countermeasures[0].confirmed);
        assert!(report.per_replica[0].rebooted);
        assert!(f.controller.regime_change_active());
        assert_eq!(
            f.controller.effective_crp_period_ms(),
            config_for_tests().crp_period_max_ms / 2
        );
        // scan-healed pages before the crossing, the rest via reboot
        assert_eq!(data.heal_count(), 4);
        // next clean scan restores the full period
        f.controller.run_crp().unwrap();
        assert!(!f.controller.regime_change_active());
        assert_eq!(
            f.controller.effective_crp_period_ms(),
            config_for_tests().crp_period_max_ms
        );
    }

    #[test]
    fn crp_false_alarm_demotes_without_reboot() {
        // four corrupted pages all healed before the fourth alert crosses,
        // so the vote sees a clean replica and demotes instead of rebooting
        let files: Vec<(String, Vec<u8>)> = (0..4)
            .map(|i| (format!("p{i}.html"), format!("content {i}").into_bytes()))
            .collect();
        let refs: Vec<(&str, &[u8])> = files
            .iter()
            .map(|(n, b)| (n.as_str(), b.as_slice()))
            .collect();
        let mut f = fixture(&refs, 2, config_for_tests());
        for (name, _) in &files {
            corrupt(&f, 2, name);
        }
        let report = f.controller.run_crp().unwrap();
        assert_eq!(report.healed_count(), 4);
        let data = f.traces.snapshot();
        assert_eq!(data.reboot_count(), 0);
        assert!(!data.countermeasures[0].confirmed);
        let t = f.controller.trust(ReplicaId(2)).unwrap();
        assert_eq!(t.state, TrustState::Suspected);
        assert_eq!(t.alert_level, f.controller.config().tc);
        assert!(!f.controller.regime_change_active());
    }

    // ---- construction guards ---------------------------------------------

    #[test]
    fn open_rejects_wrong_key_and_replica_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let golden = dir.path().join("golden");
        fs::create_dir_all(&golden).unwrap();
        fs::write(golden.join("a.html"), b"a").unwrap();
        let key = AesKey128::new([1; 16]);
        let store = dir.path().join("store.cdsh");
        let data = dir.path().join("data");
        provision(&golden, 3, &key, &store, &data).unwrap();

        let clock = Arc::new(VirtualClock::new(0));
        let open = |config: ControllerConfig, key: AesKey128| {
            Controller::open(
                &ControllerPaths {
                    store: store.clone(),
                    golden: golden.clone(),
                    data: data.clone(),
                },
                config,
                key,
                clock.clone(),
                TraceHandle::new(false),
            )
        };
        assert!(matches!(
            open(ControllerConfig::default(), AesKey128::new([9; 16])),
            Err(CdsError::KeyMismatch)
        ));
        let mut config = ControllerConfig::default();
        config.replicas = Some(5);
        assert!(matches!(
            open(config, key.clone()),
            Err(CdsError::Config(_))
        ));
        let mut config = ControllerConfig::default();
        config.replicas = Some(3);
        assert!(open(config, key).is_ok());
    }
}
