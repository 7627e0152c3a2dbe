//! Deterministic fault-injection harness. A scenario is a text file: fixture
//! directives (pages, replica count, config overrides), a timeline of events
//! applied in virtual-time order, and assertions evaluated over the captured
//! traces. Identical scenario and seed always produce identical traces and a
//! byte-identical activity log.
//!
//! Scenario grammar, one item per line (`#` comments):
//!
//! ```text
//! seed <n>
//! replicas <n>
//! page <path> <size_bytes>
//! config <key> <value>
//! <time_ms> request <path>
//! <time_ms> corrupt <replica> <path> flip <offset>
//! <time_ms> corrupt <replica> <path> overwrite <hex-bytes>
//! <time_ms> corrupt <replica> <path> truncate <new_len>
//! <time_ms> corrupt <replica> <path> random <len>
//! <time_ms> delete <replica> <path>
//! <time_ms> idle
//! expect served-bytes-verified
//! expect heal-count <n>
//! expect reboot-count <n>
//! expect alarm-tiers <none | tier[,tier...]>
//! ```

pub mod bench;
mod rng;

pub use rng::{fnv1a, SplitMix64};

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::analyzer::{AlarmTier, ACTIVITY_LOG};
use crate::clock::{Clock, VirtualClock};
use crate::controller::{Controller, ControllerConfig, ControllerPaths, CrpReport};
use crate::crypto::{md5_digest, AesKey128, Digest128};
use crate::error::{CdsError, Result};
use crate::gateway::{http, render_response, run_due_crp, Gate};
use crate::hashstore::{provision, PagePath};
use crate::replicas::ReplicaId;
use crate::traces::{TraceData, TraceHandle};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageSpec {
    pub path: String,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// XOR one byte at (offset mod length).
    Flip { offset: usize },
    /// Replace the whole file.
    Overwrite { bytes: Vec<u8> },
    /// Cut the file down to `len` bytes (must shrink).
    Truncate { len: usize },
    /// Replace with `len` seeded random bytes.
    Random { len: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Request {
        page: String,
    },
    Corrupt {
        replica: u16,
        page: String,
        mutation: Mutation,
    },
    Delete {
        replica: u16,
        page: String,
    },
    /// Advance time and give the scheduler a tick; nothing else.
    Idle,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioEvent {
    pub at_ms: u64,
    pub kind: EventKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    ServedBytesVerified,
    HealCount(u64),
    RebootCount(u64),
    AlarmTiers(Vec<AlarmTier>),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub replicas: u16,
    pub pages: Vec<PageSpec>,
    pub config_overrides: Vec<(String, String)>,
    pub events: Vec<ScenarioEvent>,
    pub expected: Vec<Expectation>,
}

impl Scenario {
    pub fn config(&self) -> Result<ControllerConfig> {
        let mut text = String::new();
        for (key, value) in &self.config_overrides {
            text.push_str(&format!("{key}={value}\n"));
        }
        text.push_str(&format!("replicas={}\n", self.replicas));
        ControllerConfig::parse(&text)
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut scenario = Scenario {
        seed: 42,
        replicas: 3,
        pages: Vec::new(),
        config_overrides: Vec::new(),
        events: Vec::new(),
        expected: Vec::new(),
    };
    let bad = |lineno: usize, msg: &str| {
        CdsError::Validation(format!("scenario line {}: {msg}", lineno + 1))
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "seed" if tokens.len() == 2 => {
                scenario.seed = tokens[1].parse().map_err(|_| bad(lineno, "bad seed"))?;
            }
            "replicas" if tokens.len() == 2 => {
                scenario.replicas = tokens[1].parse().map_err(|_| bad(lineno, "bad replicas"))?;
            }
            "page" if tokens.len() == 3 => {
                let path = tokens[1].to_string();
                PagePath::from_provision(path.trim_start_matches('/'))
                    .map_err(|e| bad(lineno, &e.to_string()))?;
                let size = tokens[2]
                    .parse()
                    .map_err(|_| bad(lineno, "bad page size"))?;
                scenario.pages.push(PageSpec { path, size });
            }
            "config" if tokens.len() == 3 => {
                scenario
                    .config_overrides
                    .push((tokens[1].to_string(), tokens[2].to_string()));
            }
            "expect" => {
                scenario.expected.push(parse_expect(&tokens[1..], lineno)?);
            }
            _ => {
                let at_ms: u64 = tokens[0]
                    .parse()
                    .map_err(|_| bad(lineno, "expected a time, directive, or `expect`"))?;
                let kind = parse_event(&tokens[1..], lineno)?;
                scenario.events.push(ScenarioEvent { at_ms, kind });
            }
        }
    }
    if scenario.pages.is_empty() {
        // a small default site so short scenarios stay short
        scenario.pages = vec![
            PageSpec {
                path: "/index.html".to_string(),
                size: 256,
            },
            PageSpec {
                path: "/about.html".to_string(),
                size: 512,
            },
            PageSpec {
                path: "/data/report.html".to_string(),
                size: 1024,
            },
        ];
    }
    validate_scenario(&scenario)?;
    Ok(scenario)
}

fn parse_event(tokens: &[&str], lineno: usize) -> Result<EventKind> {
    let bad = |msg: &str| CdsError::Validation(format!("scenario line {}: {msg}", lineno + 1));
    match tokens {
        ["request", page] => Ok(EventKind::Request {
            page: page.to_string(),
        }),
        ["idle"] => Ok(EventKind::Idle),
        ["delete", replica, page] => Ok(EventKind::Delete {
            replica: replica.parse().map_err(|_| bad("bad replica id"))?,
            page: page.to_string(),
        }),
        ["corrupt", replica, page, rest @ ..] => {
            let replica: u16 = replica.parse().map_err(|_| bad("bad replica id"))?;
            let mutation = match rest {
                ["flip", off] => Mutation::Flip {
                    offset: off.parse().map_err(|_| bad("bad flip offset"))?,
                },
                ["overwrite", hex] => {
                    let bytes = hex_bytes(hex).map_err(|_| bad("bad overwrite hex"))?;
                    Mutation::Overwrite { bytes }
                }
                ["truncate", len] => Mutation::Truncate {
                    len: len.parse().map_err(|_| bad("bad truncate length"))?,
                },
                ["random", len] => Mutation::Random {
                    len: len.parse().map_err(|_| bad("bad random length"))?,
                },
                _ => return Err(bad("unknown mutation; use flip/overwrite/truncate/random")),
            };
            Ok(EventKind::Corrupt {
                replica,
                page: page.to_string(),
                mutation,
            })
        }
        _ => Err(bad("unknown event kind")),
    }
}

fn parse_expect(tokens: &[&str], lineno: usize) -> Result<Expectation> {
    let bad = |msg: &str| CdsError::Validation(format!("scenario line {}: {msg}", lineno + 1));
    match tokens {
        ["served-bytes-verified"] => Ok(Expectation::ServedBytesVerified),
        ["heal-count", n] => Ok(Expectation::HealCount(
            n.parse().map_err(|_| bad("bad heal-count"))?,
        )),
        ["reboot-count", n] => Ok(Expectation::RebootCount(
            n.parse().map_err(|_| bad("bad reboot-count"))?,
        )),
        ["alarm-tiers", "none"] => Ok(Expectation::AlarmTiers(Vec::new())),
        ["alarm-tiers", list] => {
            let tiers = list
                .split(',')
                .map(AlarmTier::parse)
                .collect::<Result<Vec<_>>>()?;
            Ok(Expectation::AlarmTiers(tiers))
        }
        _ => Err(bad("unknown expectation")),
    }
}

fn validate_scenario(scenario: &Scenario) -> Result<()> {
    if scenario.replicas == 0 {
        return Err(CdsError::Validation(
            "scenario needs replicas >= 1".to_string(),
        ));
    }
    let mut last = 0u64;
    for ev in &scenario.events {
        if ev.at_ms < last {
            return Err(CdsError::Validation(format!(
                "events out of order at t={}",
                ev.at_ms
            )));
        }
        last = ev.at_ms;
        let (replica, page) = match &ev.kind {
            EventKind::Request { page } => (None, Some(page)),
            EventKind::Corrupt { replica, page, .. } => (Some(*replica), Some(page)),
            EventKind::Delete { replica, page } => (Some(*replica), Some(page)),
            EventKind::Idle => (None, None),
        };
        if let Some(r) = replica {
            if r == 0 || r > scenario.replicas {
                return Err(CdsError::Validation(format!(
                    "event references unknown replica {r}"
                )));
            }
        }
        if let Some(p) = page {
            if !scenario.pages.iter().any(|spec| spec.path == *p) {
                return Err(CdsError::Validation(format!(
                    "event references unknown page {p}"
                )));
            }
        }
    }
    Ok(())
}

fn hex_bytes(s: &str) -> Result<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return Err(CdsError::Validation("odd-length hex".to_string()));
    }
    let mut out = Vec::with_capacity(s.len() / 2);
    let bytes = s.as_bytes();
    for pair in bytes.chunks_exact(2) {
        let hi = (pair[0] as char)
            .to_digit(16)
            .ok_or_else(|| CdsError::Validation("bad hex digit".to_string()))?;
        let lo = (pair[1] as char)
            .to_digit(16)
            .ok_or_else(|| CdsError::Validation("bad hex digit".to_string()))?;
        out.push(((hi << 4) | lo) as u8);
    }
    Ok(out)
}

/// In-process server under test: a provisioned store, replica trees, and a
/// controller driven by a virtual clock, wired through the same gate and
/// response builder as the live gateway.
pub struct TestServer {
    pub controller: Controller,
    pub gate: Gate,
    pub clock: Arc<VirtualClock>,
    pub traces: TraceHandle,
    pub data_dir: PathBuf,
    pub golden_dir: PathBuf,
    pub store_path: PathBuf,
    pub store_key: AesKey128,
}

#[derive(Clone, Debug)]
pub struct SimResponse {
    pub page: String,
    pub status: u16,
    pub body: Vec<u8>,
    pub served_by: Option<String>,
    pub raw_response: Vec<u8>,
}

impl TestServer {
    /// Generate golden content from the scenario seed, provision the store
    /// and replicas under `workdir`, and assemble the controller.
    pub fn provision(workdir: &Path, scenario: &Scenario) -> Result<TestServer> {
        let golden_dir = workdir.join("golden");
        let data_dir = workdir.join("data");
        let store_path = workdir.join("store.cdsh");
        fs::create_dir_all(&golden_dir)
            .map_err(|e| CdsError::io(format!("creating {}", golden_dir.display()), e))?;

        for spec in &scenario.pages {
            let mut content_rng = SplitMix64::new(scenario.seed ^ fnv1a(spec.path.as_bytes()));
            let bytes = content_rng.bytes(spec.size);
            let rel = spec.path.trim_start_matches('/');
            let path = golden_dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)
                    .map_err(|e| CdsError::io(format!("creating {}", parent.display()), e))?;
            }
            fs::write(&path, &bytes)
                .map_err(|e| CdsError::io(format!("writing {}", path.display()), e))?;
        }

        let mut key_rng = SplitMix64::new(scenario.seed.wrapping_mul(0x9e3779b97f4a7c15));
        let mut key = [0u8; 16];
        key_rng.fill_bytes(&mut key);
        let store_key = AesKey128::new(key);

        provision(
            &golden_dir,
            scenario.replicas,
            &store_key,
            &store_path,
            &data_dir,
        )?;

        let clock = Arc::new(VirtualClock::new(0));
        let traces = TraceHandle::new(true);
        let controller = Controller::open(
            &ControllerPaths {
                store: store_path.clone(),
                golden: golden_dir.clone(),
                data: data_dir.clone(),
            },
            scenario.config()?,
            store_key.clone(),
            clock.clone(),
            traces.clone(),
        )?;
        let gate = Gate::new(traces.clone(), clock.clone());
        Ok(TestServer {
            controller,
            gate,
            clock,
            traces,
            data_dir,
            golden_dir,
            store_path,
            store_key,
        })
    }

    /// Drive one GET through the full pipeline: verification under the
    /// exclusive gate, response construction, a traced transmit interval,
    /// and audit-row finalization.
    pub fn request(&mut self, raw_target: &str) -> SimResponse {
        let received_at = self.clock.now_ms();
        let pending = {
            let _session = self.gate.exclusive();
            self.controller.handle_get(http::path_of_target(raw_target))
        };
        let raw_response = render_response(&pending);
        {
            let _t = self.gate.transmit();
            // in-process: the bytes are "delivered" by returning them
        }
        let response = SimResponse {
            page: raw_target.to_string(),
            status: pending.status,
            body: pending.body.clone(),
            served_by: pending.served_by.map(|s| s.to_string()),
            raw_response,
        };
        let session_ms = self.clock.now_ms().saturating_sub(received_at);
        self.controller.finalize_exchange(pending, session_ms);
        response
    }

    /// Evaluate the scan triggers exactly like the live service loop.
    pub fn tick(&mut self) -> Result<Option<CrpReport>> {
        run_due_crp(&mut self.controller, &self.gate)
    }

    pub fn replica_file(&self, replica: u16, page: &str) -> PathBuf {
        self.data_dir
            .join(format!("replica-{replica}"))
            .join(page.trim_start_matches('/'))
    }

    /// Independent integrity sweep: re-read every replica copy from disk and
    /// compare its digest against the decrypted store expectation. Returns
    /// the number of mismatching (page, replica) pairs.
    pub fn count_mismatches(&self) -> Result<u32> {
        let mut mismatches = 0;
        let store = self.controller.store();
        for page in store.pages() {
            for id in self.controller.replicas().ids() {
                let expected = store.lookup_expected(&page, id, &self.store_key)?;
                let ok = match self.controller.replicas().read_page(id, &page) {
                    Ok(bytes) => md5_digest(&bytes) == expected,
                    Err(_) => false,
                };
                if !ok {
                    mismatches += 1;
                }
            }
        }
        Ok(mismatches)
    }

    pub fn expected_digest(&self, page: &str) -> Result<Digest128> {
        let page = PagePath::from_request(page)?;
        self.controller
            .store()
            .lookup_expected(&page, ReplicaId(1), &self.store_key)
    }

    pub fn activity_log_bytes(&self) -> Result<Vec<u8>> {
        fs::read(self.data_dir.join(ACTIVITY_LOG))
            .map_err(|e| CdsError::io("reading activity log", e))
    }
}

#[derive(Clone, Debug)]
pub struct AssertionOutcome {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct ScenarioResult {
    pub assertions: Vec<AssertionOutcome>,
    pub responses: Vec<SimResponse>,
    pub traces: TraceData,
    pub activity_log: Vec<u8>,
}

impl ScenarioResult {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

/// Apply the scenario's events in virtual-time order against the server and
/// evaluate its assertions over the captured traces.
pub fn run_scenario(scenario: &Scenario, server: &mut TestServer) -> Result<ScenarioResult> {
    let mut rng = SplitMix64::new(scenario.seed);
    let mut responses = Vec::new();

    for event in &scenario.events {
        server.clock.advance_to(event.at_ms);
        // scheduler first: a scan due at this instant runs before the event
        server.tick()?;
        match &event.kind {
            EventKind::Request { page } => {
                responses.push(server.request(page));
            }
            EventKind::Corrupt {
                replica,
                page,
                mutation,
            } => {
                apply_corruption(server, *replica, page, mutation, &mut rng)?;
            }
            EventKind::Delete { replica, page } => {
                let path = server.replica_file(*replica, page);
                fs::remove_file(&path).map_err(|e| {
                    CdsError::Validation(format!("delete of {page} on replica {replica}: {e}"))
                })?;
            }
            EventKind::Idle => {}
        }
    }

    let traces = server.traces.snapshot();
    let assertions = evaluate(scenario, server, &responses, &traces)?;
    Ok(ScenarioResult {
        assertions,
        responses,
        traces,
        activity_log: server.activity_log_bytes()?,
    })
}

/// Mutate a replica file so that its digest no longer matches the stored
/// expectation, re-rolling the mutation if it ever lands on matching bytes.
fn apply_corruption(
    server: &TestServer,
    replica: u16,
    page: &str,
    mutation: &Mutation,
    rng: &mut SplitMix64,
) -> Result<()> {
    let path = server.replica_file(replica, page);
    let current = fs::read(&path).map_err(|e| {
        CdsError::Validation(format!("corrupt of {page} on replica {replica}: {e}"))
    })?;
    let expected = server.expected_digest(page)?;

    let mut attempt = 0;
    let mutated = loop {
        attempt += 1;
        if attempt > 16 {
            return Err(CdsError::Validation(format!(
                "mutation of {page} keeps matching the golden digest"
            )));
        }
        let candidate = match mutation {
            Mutation::Flip { offset } => {
                if current.is_empty() {
                    return Err(CdsError::Validation(format!(
                        "cannot flip a byte of empty {page}"
                    )));
                }
                let mut bytes = current.clone();
                let at = (offset + attempt - 1) % bytes.len();
                bytes[at] ^= 0xff;
                bytes
            }
            Mutation::Overwrite { bytes } => {
                if md5_digest(bytes) == expected {
                    return Err(CdsError::Validation(format!(
                        "overwrite bytes for {page} equal the golden content"
                    )));
                }
                bytes.clone()
            }
            Mutation::Truncate { len } => {
                if *len >= current.len() {
                    return Err(CdsError::Validation(format!(
                        "truncate length {len} does not shrink {page} ({} bytes)",
                        current.len()
                    )));
                }
                current[..*len].to_vec()
            }
            Mutation::Random { len } => rng.bytes(*len),
        };
        if md5_digest(&candidate) != expected {
            break candidate;
        }
    };
    fs::write(&path, &mutated)
        .map_err(|e| CdsError::io(format!("writing corrupted {}", path.display()), e))
}

fn evaluate(
    scenario: &Scenario,
    server: &TestServer,
    responses: &[SimResponse],
    traces: &TraceData,
) -> Result<Vec<AssertionOutcome>> {
    let mut outcomes = Vec::new();
    for expectation in &scenario.expected {
        let outcome = match expectation {
            Expectation::ServedBytesVerified => {
                let mut failures = Vec::new();
                for r in responses.iter().filter(|r| r.status == 200) {
                    let expected = server.expected_digest(&r.page)?;
                    if md5_digest(&r.body) != expected {
                        failures.push(r.page.clone());
                    }
                }
                AssertionOutcome {
                    label: "served-bytes-verified".to_string(),
                    passed: failures.is_empty(),
                    detail: if failures.is_empty() {
                        format!(
                            "{} verified responses",
                            responses.iter().filter(|r| r.status == 200).count()
                        )
                    } else {
                        format!("unverified bodies for {failures:?}")
                    },
                }
            }
            Expectation::HealCount(want) => outcome_count("heal-count", *want, traces.heal_count()),
            Expectation::RebootCount(want) => {
                outcome_count("reboot-count", *want, traces.reboot_count())
            }
            Expectation::AlarmTiers(want) => {
                let got: Vec<AlarmTier> = traces.alarms.iter().map(|a| a.tier).collect();
                AssertionOutcome {
                    label: "alarm-tiers".to_string(),
                    passed: got == *want,
                    detail: format!("expected {want:?}, observed {got:?}"),
                }
            }
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn outcome_count(label: &str, want: u64, got: u64) -> AssertionOutcome {
    AssertionOutcome {
        label: label.to_string(),
        passed: want == got,
        detail: format!("expected {want}, observed {got}"),
    }
}

/// Create a unique scratch directory under the system temp dir.
pub fn make_workdir(prefix: &str) -> Result<PathBuf> {
    let base = std::env::temp_dir();
    let pid = std::process::id();
    for attempt in 0..64 {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.subsec_nanos())
            .unwrap_or(0);
        let candidate = base.join(format!("{prefix}-{pid}-{nanos}-{attempt}"));
        match fs::create_dir(&candidate) {
            Ok(()) => return Ok(candidate),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CdsError::io("creating scratch dir", e)),
        }
    }
    Err(CdsError::Validation(
        "could not create scratch dir".to_string(),
    ))
}
