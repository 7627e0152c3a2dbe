//! HTTP front end. Requests are accepted and parsed concurrently, then
//! funneled through a bounded FIFO queue into a single service worker: the
//! worker verifies under the gate's exclusive half, transmits under its
//! shared half, and finalizes the audit row. Requests that find the queue
//! full are refused with 503. Connections close after every response.

mod gate;
pub mod http;

pub use gate::Gate;

use std::io::Write;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use crate::clock::Clock;
use crate::controller::{Controller, CrpReport, PendingExchange};
use crate::error::{CdsError, Result};
use http::{ParseOutcome, ParsedRequest};

/// Pending requests the worker will take in FIFO order; arrivals beyond this
/// are refused with 503 rather than queued invisibly.
pub const QUEUE_CAPACITY: usize = 64;

const IDLE_POLL: Duration = Duration::from_millis(25);
const READ_TIMEOUT: Duration = Duration::from_secs(5);

/// One exchange as the gateway saw it, for the server's own stdout log.
#[derive(Clone, Debug)]
pub struct HttpExchange {
    pub client_address: String,
    pub method: String,
    pub target: String,
    pub received_at_ms: u64,
    pub status: u16,
    pub response_length: u64,
    pub session_duration_ms: u64,
}

impl HttpExchange {
    fn log_line(&self) -> String {
        format!(
            "{} {} {} -> {} ({} bytes, {} ms)",
            self.client_address,
            self.method,
            self.target,
            self.status,
            self.response_length,
            self.session_duration_ms
        )
    }
}

struct Job {
    stream: TcpStream,
    outcome: ParseOutcome,
    client: String,
    received_at_ms: u64,
}

/// A refused-at-the-door exchange the worker still has to account for.
struct OverflowNote {
    target: String,
    at_ms: u64,
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Arc<AtomicBool>,
    worker: Option<JoinHandle<Controller>>,
    listener_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Signal shutdown, join the threads, and hand the controller back for
    /// inspection.
    pub fn stop(mut self) -> Controller {
        self.shutdown.store(true, Ordering::SeqCst);
        if let Some(t) = self.listener_thread.take() {
            let _ = t.join();
        }
        self.worker
            .take()
            .expect("worker joined once")
            .join()
            .expect("worker thread panicked")
    }

    /// Block on the worker without requesting shutdown; only a signal or a
    /// crash ends the process. Used by the CLI's foreground serve.
    pub fn wait(mut self) -> Controller {
        self.worker
            .take()
            .expect("worker joined once")
            .join()
            .expect("worker thread panicked")
    }
}

/// Run the server on an already-bound listener. Returns a handle owning the
/// listener and worker threads; the controller is returned by
/// [`ServerHandle::stop`].
pub fn spawn(
    listener: TcpListener,
    controller: Controller,
    gate: Gate,
    clock: Arc<dyn Clock>,
    quiet: bool,
) -> Result<ServerHandle> {
    let addr = listener
        .local_addr()
        .map_err(|e| CdsError::io("reading listener address", e))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| CdsError::io("setting listener nonblocking", e))?;
    let shutdown = Arc::new(AtomicBool::new(false));

    let (job_tx, job_rx) = mpsc::sync_channel::<Job>(QUEUE_CAPACITY);
    let (overflow_tx, overflow_rx) = mpsc::channel::<OverflowNote>();

    let listener_shutdown = shutdown.clone();
    let listener_gate = gate.clone();
    let listener_clock = clock.clone();
    let listener_thread = std::thread::spawn(move || {
        accept_loop(
            listener,
            listener_shutdown,
            job_tx,
            overflow_tx,
            listener_gate,
            listener_clock,
        );
    });

    let worker_shutdown = shutdown.clone();
    let worker = std::thread::spawn(move || {
        service_loop(
            controller,
            gate,
            clock,
            job_rx,
            overflow_rx,
            worker_shutdown,
            quiet,
        )
    });

    Ok(ServerHandle {
        addr,
        shutdown,
        worker: Some(worker),
        listener_thread: Some(listener_thread),
    })
}

fn accept_loop(
    listener: TcpListener,
    shutdown: Arc<AtomicBool>,
    job_tx: SyncSender<Job>,
    overflow_tx: mpsc::Sender<OverflowNote>,
    gate: Gate,
    clock: Arc<dyn Clock>,
) {
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let job_tx = job_tx.clone();
                let overflow_tx = overflow_tx.clone();
                let gate = gate.clone();
                let clock = clock.clone();
                // parse concurrently; only service is serialized
                std::thread::spawn(move || {
                    handle_connection(stream, peer, job_tx, overflow_tx, gate, clock);
                });
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(IDLE_POLL);
            }
            Err(_) => std::thread::sleep(IDLE_POLL),
        }
    }
}

fn handle_connection(
    mut stream: TcpStream,
    peer: SocketAddr,
    job_tx: SyncSender<Job>,
    overflow_tx: mpsc::Sender<OverflowNote>,
    gate: Gate,
    clock: Arc<dyn Clock>,
) {
    let _ = stream.set_read_timeout(Some(READ_TIMEOUT));
    let _ = stream.set_nonblocking(false);
    let received_at_ms = clock.now_ms();
    let outcome = match http::read_request_head(&mut stream) {
        Ok(outcome) => outcome,
        Err(_) => return, // client went away mid-head
    };
    let job = Job {
        stream,
        outcome,
        client: peer.to_string(),
        received_at_ms,
    };
    if let Err(mpsc::TrySendError::Full(job)) = job_tx.try_send(job) {
        // queue full: refuse now, but never transmit during a controller session
        let mut stream = job.stream;
        let body = http::error_body(503);
        let response = http::build_response(503, "text/plain", None, &body);
        {
            let _t = gate.transmit();
            let _ = stream.write_all(&response);
            let _ = stream.flush();
        }
        let target = match job.outcome {
            ParseOutcome::Request(r) => r.target,
            ParseOutcome::Malformed(_) => "?".to_string(),
        };
        let _ = overflow_tx.send(OverflowNote {
            target,
            at_ms: job.received_at_ms,
        });
    }
}

fn service_loop(
    mut controller: Controller,
    gate: Gate,
    clock: Arc<dyn Clock>,
    job_rx: Receiver<Job>,
    overflow_rx: Receiver<OverflowNote>,
    shutdown: Arc<AtomicBool>,
    quiet: bool,
) -> Controller {
    loop {
        // account for door-refused exchanges
        while let Ok(note) = overflow_rx.try_recv() {
            let pending = {
                let _session = gate.exclusive();
                controller.pending_unverified(&note.target, 503, true, note.at_ms)
            };
            controller.finalize_exchange(pending, 0);
        }

        match job_rx.recv_timeout(IDLE_POLL) {
            Ok(job) => {
                serve_one(&mut controller, &gate, &clock, job, quiet);
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => break,
        }
        if let Err(e) = run_due_crp(&mut controller, &gate) {
            eprintln!("cds: scan failed: {e}");
        }
        if shutdown.load(Ordering::SeqCst) {
            break;
        }
    }
    controller
}

fn serve_one(
    controller: &mut Controller,
    gate: &Gate,
    clock: &Arc<dyn Clock>,
    mut job: Job,
    quiet: bool,
) {
    let (method, target) = match &job.outcome {
        ParseOutcome::Request(ParsedRequest { method, target }) => (method.clone(), target.clone()),
        ParseOutcome::Malformed(_) => ("?".to_string(), "?".to_string()),
    };

    let pending = {
        let _session = gate.exclusive();
        match &job.outcome {
            ParseOutcome::Request(req) if req.method == "GET" => {
                controller.handle_get(http::path_of_target(&req.target))
            }
            ParseOutcome::Request(req) => {
                controller.pending_unverified(&req.target, 405, true, job.received_at_ms)
            }
            ParseOutcome::Malformed(_) => {
                controller.pending_unverified("?", 500, false, job.received_at_ms)
            }
        }
    };

    let response = render_response(&pending);
    let response_length = response.len() as u64;
    {
        let _t = gate.transmit();
        let _ = job.stream.write_all(&response);
        let _ = job.stream.flush();
    }
    let session_ms = clock.now_ms().saturating_sub(job.received_at_ms);
    let exchange = HttpExchange {
        client_address: job.client.clone(),
        method,
        target,
        received_at_ms: job.received_at_ms,
        status: pending.status,
        response_length,
        session_duration_ms: session_ms,
    };
    controller.finalize_exchange(pending, session_ms);
    if !quiet {
        println!("{}", exchange.log_line());
    }
}

/// Full response bytes for a handled exchange, shared by the live server and
/// the in-process harness so both exercise identical response construction.
pub fn render_response(pending: &PendingExchange) -> Vec<u8> {
    // X-CDS-Replica carries the bare id, or REBOOT
    let replica = pending.served_by.map(|s| match s {
        crate::controller::ServedBy::Replica(id) => id.to_string(),
        crate::controller::ServedBy::Reboot => "REBOOT".to_string(),
    });
    if pending.status == 200 {
        http::build_response(
            200,
            pending
                .content_type
                .as_deref()
                .unwrap_or("application/octet-stream"),
            replica.as_deref(),
            &pending.body,
        )
    } else {
        let body = http::error_body(pending.status);
        http::build_response(pending.status, "text/plain", replica.as_deref(), &body)
    }
}

/// Run a scan if one is due, holding the gate's exclusive half for its
/// duration. Shared by the service loop and the harness.
pub fn run_due_crp(controller: &mut Controller, gate: &Gate) -> Result<Option<CrpReport>> {
    if !controller.crp_due() {
        return Ok(None);
    }
    let _session = gate.exclusive();
    controller.run_crp().map(Some)
}

/// Single-threaded serve loop: accept, parse, verify, and transmit strictly
/// in arrival order, stepping a scripted clock while idle. This is the
/// deterministic mode behind `--deterministic`.
pub fn serve_deterministic(
    listener: TcpListener,
    mut controller: Controller,
    gate: Gate,
    clock: Arc<dyn Clock>,
    step_clock: impl Fn() -> bool,
    shutdown: Arc<AtomicBool>,
    quiet: bool,
) -> Result<Controller> {
    listener
        .set_nonblocking(true)
        .map_err(|e| CdsError::io("setting listener nonblocking", e))?;
    while !shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((mut stream, peer)) => {
                let _ = stream.set_read_timeout(Some(READ_TIMEOUT));
                let _ = stream.set_nonblocking(false);
                let received_at_ms = clock.now_ms();
                let outcome = match http::read_request_head(&mut stream) {
                    Ok(o) => o,
                    Err(_) => continue,
                };
                serve_one(
                    &mut controller,
                    &gate,
                    &clock,
                    Job {
                        stream,
                        outcome,
                        client: peer.to_string(),
                        received_at_ms,
                    },
                    quiet,
                );
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if !step_clock() {
                    std::thread::sleep(IDLE_POLL);
                }
            }
            Err(_) => std::thread::sleep(IDLE_POLL),
        }
        if let Err(e) = run_due_crp(&mut controller, &gate) {
            eprintln!("cds: scan failed: {e}");
        }
    }
    Ok(controller)
}
