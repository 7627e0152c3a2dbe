//! `cds` command line: provision a deployment, serve verified content, run
//! fault-injection scenarios, emit reports, compute rank correlations, and
//! benchmark serve latency.

use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use cds::analyzer::{rankcorr, report};
use cds::clock::{Clock, ScriptedClock, WallClock};
use cds::controller::{Controller, ControllerConfig, ControllerPaths};
use cds::crypto::{AesKey128, Digest128};
use cds::error::{CdsError, Result};
use cds::gateway::{self, Gate};
use cds::harness::{self, bench, TestServer};
use cds::hashstore;
use cds::traces::TraceHandle;

#[derive(Parser)]
#[command(name = "cds", version, about = "Intrusion-tolerant content server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the encrypted hash store and replica trees from a golden content directory
    Provision {
        /// Golden content tree (the healing source)
        #[arg(long)]
        golden: PathBuf,
        /// Number of replica content directories to materialize
        #[arg(long)]
        replicas: u16,
        /// Hash-store file to write
        #[arg(long)]
        store: PathBuf,
        /// 16-byte (or 32-hex-char) store key file
        #[arg(long)]
        key_file: PathBuf,
        /// Data directory for replicas and logs (default: the store file's directory)
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Serve content over HTTP, verifying every response against the store
    Serve {
        /// Listen address, e.g. 127.0.0.1:8080
        #[arg(long)]
        listen: String,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        golden: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// key=value controller configuration file
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        key_file: PathBuf,
        /// Single-threaded serve loop with a virtual clock (test hook)
        #[arg(long)]
        deterministic: bool,
        /// Clock script for --deterministic: lines of `advance <ms>`
        #[arg(long)]
        clock: Option<PathBuf>,
    },
    /// Summarize an activity log into report files
    Report {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Requests per failure-rate window in the time series
        #[arg(long, default_value_t = 100)]
        window: u32,
    },
    /// Rank correlation between two rankings in a CSV file (label,rank_a,rank_b)
    Rankcorr {
        #[arg(long)]
        csv: PathBuf,
        /// Only the r = 1 - Σd²/(N(N²−1)) form
        #[arg(long, conflicts_with = "standard")]
        simple: bool,
        /// Only the conventional Spearman form (factor 6 in the numerator)
        #[arg(long)]
        standard: bool,
    },
    /// Run a fault-injection scenario against a scratch deployment
    Harness {
        #[arg(long)]
        scenario: PathBuf,
        /// Override the scenario's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Keep the scratch deployment directory for inspection
        #[arg(long)]
        keep: bool,
    },
    /// Measure serve latency with and without verification
    Bench {
        /// Page manifest: one `<name> <size_bytes>` per line
        #[arg(long)]
        pages: PathBuf,
        #[arg(long, default_value_t = 20)]
        reps: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("cds: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Provision {
            golden,
            replicas,
            store,
            key_file,
            data,
        } => {
            let key = load_key_file(&key_file)?;
            let data = data.unwrap_or_else(|| parent_dir(&store));
            let manifest = hashstore::provision(&golden, replicas, &key, &store, &data)?;
            println!(
                "provisioned {} pages x {} replicas",
                manifest.entry_count, manifest.replica_count
            );
            println!("store:   {}", store.display());
            println!("data:    {}", data.display());
            println!("key fp:  {}", manifest.key_fingerprint.to_hex());
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve {
            listen,
            store,
            golden,
            data,
            config,
            key_file,
            deterministic,
            clock,
        } => serve(
            listen,
            store,
            golden,
            data,
            config,
            key_file,
            deterministic,
            clock,
        ),
        Command::Report { log, out, window } => {
            let summary = report::emit_report(&log, &out, window)?;
            println!(
                "report written to {} ({} exchanges, {} corrupt lines)",
                out.display(),
                summary.exchanges,
                summary.corrupt_lines
            );
            for name in [
                report::SUMMARY_FILE,
                report::TIMESERIES_FILE,
                report::CHART_FILE,
            ] {
                println!("  {}", out.join(name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Rankcorr {
            csv,
            simple,
            standard,
        } => {
            let (a, b) = load_rankings(&csv)?;
            if !standard {
                println!("r = {}", rankcorr::rank_correlation(&a, &b)?);
            }
            if !simple {
                println!(
                    "r (standard) = {}",
                    rankcorr::rank_correlation_standard(&a, &b)?
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Harness {
            scenario,
            seed,
            keep,
        } => run_harness(&scenario, seed, keep),
        Command::Bench { pages, reps } => {
            let pages = load_page_manifest(&pages)?;
            let workdir = harness::make_workdir("cds-bench")?;
            let result = bench::measure_latency(&pages, reps, &workdir);
            let _ = fs::remove_dir_all(&workdir);
            let rows = result?;
            print!("{}", bench::render_table(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn serve(
    listen: String,
    store: PathBuf,
    golden: PathBuf,
    data: PathBuf,
    config_path: PathBuf,
    key_file: PathBuf,
    deterministic: bool,
    clock_script: Option<PathBuf>,
) -> Result<ExitCode> {
    let config_text = fs::read_to_string(&config_path)
        .map_err(|e| CdsError::io(format!("reading config {}", config_path.display()), e))?;
    let config = ControllerConfig::parse(&config_text)?;
    let key = load_key_file(&key_file)?;

    let scripted: Option<Arc<ScriptedClock>> = match (&clock_script, deterministic) {
        (Some(path), true) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CdsError::io(format!("reading clock script {}", path.display()), e))?;
            Some(Arc::new(
                ScriptedClock::parse(&text).map_err(CdsError::Config)?,
            ))
        }
        (Some(_), false) => {
            return Err(CdsError::Config(
                "--clock requires --deterministic".to_string(),
            ))
        }
        (None, true) => Some(Arc::new(
            ScriptedClock::parse("").map_err(CdsError::Config)?,
        )),
        (None, false) => None,
    };
    let clock: Arc<dyn Clock> = match &scripted {
        Some(s) => s.clone(),
        None => Arc::new(WallClock),
    };

    let traces = TraceHandle::new(deterministic);
    let controller = Controller::open(
        &ControllerPaths {
            store,
            golden,
            data,
        },
        config.clone(),
        key,
        clock.clone(),
        traces.clone(),
    )?;

    println!("cds serving on {listen}");
    println!(
        "store: {} pages x {} replicas, key fp {}",
        controller.store().entry_count(),
        controller.replica_count(),
        controller.store().manifest().key_fingerprint.to_hex()
    );
    for line in config.banner_lines() {
        println!("config: {line}");
    }
    if deterministic {
        println!("mode: deterministic (virtual clock)");
    }

    let listener =
        TcpListener::bind(&listen).map_err(|e| CdsError::io(format!("binding {listen}"), e))?;
    let gate = Gate::new(traces, clock.clone());

    if deterministic {
        let scripted = scripted.expect("deterministic mode always has a scripted clock");
        let shutdown = Arc::new(AtomicBool::new(false));
        gateway::serve_deterministic(
            listener,
            controller,
            gate,
            clock,
            move || scripted.step(),
            shutdown,
            false,
        )?;
    } else {
        let handle = gateway::spawn(listener, controller, gate, clock, false)?;
        handle.wait();
    }
    Ok(ExitCode::SUCCESS)
}

fn run_harness(scenario_path: &Path, seed: Option<u64>, keep: bool) -> Result<ExitCode> {
    let text = fs::read_to_string(scenario_path)
        .map_err(|e| CdsError::io(format!("reading scenario {}", scenario_path.display()), e))?;
    let mut scenario = harness::parse_scenario(&text)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let workdir = harness::make_workdir("cds-harness")?;
    println!(
        "scenario: {} (seed {})",
        scenario_path.display(),
        scenario.seed
    );
    println!("workdir:  {}", workdir.display());

    let mut server = TestServer::provision(&workdir, &scenario)?;
    let result = harness::run_scenario(&scenario, &mut server)?;

    for r in &result.responses {
        println!(
            "request {} -> {} (served by {})",
            r.page,
            r.status,
            r.served_by.as_deref().unwrap_or("-")
        );
    }
    println!(
        "events applied; {} heals, {} reboots, {} alarms",
        result.traces.heal_count(),
        result.traces.reboot_count(),
        result.traces.alarms.len()
    );
    for a in &result.assertions {
        println!(
            "{} {}: {}",
            if a.passed { "PASS" } else { "FAIL" },
            a.label,
            a.detail
        );
    }
    let passed = result.passed();
    if keep {
        println!("scratch deployment kept at {}", workdir.display());
    } else {
        let _ = fs::remove_dir_all(&workdir);
    }
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// A store key file holds either exactly 16 raw bytes or 32 hex characters.
fn load_key_file(path: &Path) -> Result<AesKey128> {
    let bytes = fs::read(path)
        .map_err(|e| CdsError::io(format!("reading key file {}", path.display()), e))?;
    if bytes.len() == 16 {
        return Ok(AesKey128::new(bytes.try_into().expect("checked length")));
    }
    let text = String::from_utf8(bytes).map_err(|_| {
        CdsError::Validation(format!(
            "key file {} is neither 16 raw bytes nor hex text",
            path.display()
        ))
    })?;
    let digest = Digest128::from_hex(text.trim())?;
    Ok(AesKey128::new(*digest.as_bytes()))
}

/// CSV of `label,rank_a,rank_b`; a non-numeric first row is a header.
fn load_rankings(path: &Path) -> Result<(Vec<u32>, Vec<u32>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CdsError::io(format!("reading csv {}", path.display()), e))?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            return Err(CdsError::Validation(format!(
                "csv line {}: expected label,rank_a,rank_b",
                lineno + 1
            )));
        }
        match (cols[1].parse::<u32>(), cols[2].parse::<u32>()) {
            (Ok(x), Ok(y)) => {
                a.push(x);
                b.push(y);
            }
            _ if lineno == 0 => continue, // header row
            _ => {
                return Err(CdsError::Validation(format!(
                    "csv line {}: ranks must be integers",
                    lineno + 1
                )))
            }
        }
    }
    Ok((a, b))
}

fn load_page_manifest(path: &Path) -> Result<Vec<(String, usize)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CdsError::io(format!("reading page manifest {}", path.display()), e))?;
    let mut pages = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(name), Some(size), None) => {
                let size: usize = size.parse().map_err(|_| {
                    CdsError::Validation(format!("manifest line {}: bad size", lineno + 1))
                })?;
                pages.push((name.to_string(), size));
            }
            _ => {
                return Err(CdsError::Validation(format!(
                    "manifest line {}: expected `<name> <size_bytes>`",
                    lineno + 1
                )))
            }
        }
    }
    if pages.is_empty() {
        return Err(CdsError::Validation("page manifest is empty".to_string()));
    }
    Ok(pages)
}
