//! Wall-clock latency measurement. Provisions a scratch deployment from a
//! page manifest, serves each page repeatedly through the verified path and
//! through a hash-check bypass, and reports per-page medians and p95s plus
//! the verification overhead. Absolute numbers are hardware-bound; the
//! point of the table is the overhead column and honest reporting.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use super::{fnv1a, SplitMix64};
use crate::clock::WallClock;
use crate::controller::{Controller, ControllerConfig, ControllerPaths};
use crate::crypto::AesKey128;
use crate::error::{CdsError, Result};
use crate::gateway::{render_response, Gate};
use crate::hashstore::provision;
use crate::traces::TraceHandle;

const CONTENT_SEED: u64 = 0xbe9c;
const BENCH_REPLICAS: u16 = 3;

#[derive(Clone, Debug)]
pub struct LatencyRow {
    pub page: String,
    pub size_bytes: u64,
    pub verified_median_us: u64,
    pub verified_p95_us: u64,
    pub bypass_median_us: u64,
    pub bypass_p95_us: u64,
    /// Verified median minus bypass median; can go negative under noise and
    /// is reported as measured.
    pub overhead_us: i64,
}

/// Provision `pages` (name, size in bytes) under `workdir` and measure serve
/// latency over `reps` repetitions per page and mode.
pub fn measure_latency(
    pages: &[(String, usize)],
    reps: u32,
    workdir: &Path,
) -> Result<Vec<LatencyRow>> {
    if reps == 0 {
        return Err(CdsError::Validation("reps must be positive".to_string()));
    }
    let golden_dir = workdir.join("golden");
    let data_dir = workdir.join("data");
    let store_path = workdir.join("store.cdsh");
    fs::create_dir_all(&golden_dir)
        .map_err(|e| CdsError::io(format!("creating {}", golden_dir.display()), e))?;

    for (name, size) in pages {
        let mut rng = SplitMix64::new(CONTENT_SEED ^ fnv1a(name.as_bytes()));
        let rel = name.trim_start_matches('/');
        let path = golden_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)
                .map_err(|e| CdsError::io(format!("creating {}", parent.display()), e))?;
        }
        fs::write(&path, rng.bytes(*size))
            .map_err(|e| CdsError::io(format!("writing {}", path.display()), e))?;
    }

    let store_key = AesKey128::new(*b"cds-bench-key--!");
    provision(
        &golden_dir,
        BENCH_REPLICAS,
        &store_key,
        &store_path,
        &data_dir,
    )?;

    // keep the scheduler quiet during measurement
    let config = ControllerConfig {
        crp_idle_trigger_ms: 3_600_000,
        crp_period_max_ms: 7_200_000,
        ..ControllerConfig::default()
    };

    let clock = Arc::new(WallClock);
    let traces = TraceHandle::new(false);
    let mut controller = Controller::open(
        &ControllerPaths {
            store: store_path,
            golden: golden_dir,
            data: data_dir,
        },
        config,
        store_key,
        clock.clone(),
        traces.clone(),
    )?;
    let gate = Gate::new(traces, clock);

    let mut rows = Vec::new();
    for (name, size) in pages {
        let target = if name.starts_with('/') {
            name.clone()
        } else {
            format!("/{name}")
        };
        // warm caches and the store before timing
        let warm = timed_verified(&mut controller, &gate, &target)?;
        let _ = warm;

        let mut verified = Vec::with_capacity(reps as usize);
        for _ in 0..reps {
            verified.push(timed_verified(&mut controller, &gate, &target)?);
        }
        let mut bypass = Vec::with_capacity(reps as usize);
        for _ in 0..reps {
            bypass.push(timed_bypass(&mut controller, &target)?);
        }
        verified.sort_unstable();
        bypass.sort_unstable();
        let verified_median = percentile(&verified, 50);
        let bypass_median = percentile(&bypass, 50);
        rows.push(LatencyRow {
            page: target,
            size_bytes: *size as u64,
            verified_median_us: verified_median,
            verified_p95_us: percentile(&verified, 95),
            bypass_median_us: bypass_median,
            bypass_p95_us: percentile(&bypass, 95),
            overhead_us: verified_median as i64 - bypass_median as i64,
        });
    }
    Ok(rows)
}

fn timed_verified(controller: &mut Controller, gate: &Gate, target: &str) -> Result<u64> {
    let start = Instant::now();
    let pending = {
        let _session = gate.exclusive();
        controller.handle_get(target)
    };
    if pending.status != 200 {
        return Err(CdsError::Validation(format!(
            "bench page {target} returned {}",
            pending.status
        )));
    }
    let response = render_response(&pending);
    std::hint::black_box(&response);
    controller.finalize_exchange(pending, 0);
    Ok(start.elapsed().as_micros() as u64)
}

fn timed_bypass(controller: &mut Controller, target: &str) -> Result<u64> {
    let start = Instant::now();
    let (body, content_type) = controller.serve_unverified(target)?;
    let response = crate::gateway::http::build_response(200, &content_type, None, &body);
    std::hint::black_box(&response);
    Ok(start.elapsed().as_micros() as u64)
}

/// Nearest-rank percentile over a sorted sample.
fn percentile(sorted: &[u64], pct: u32) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((pct as f64 / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Fixed-width table, one row per page.
pub fn render_table(rows: &[LatencyRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<5} {:<24} {:>10} {:>15} {:>13} {:>13} {:>11} {:>13}\n",
        "SI No",
        "Page",
        "Size (MB)",
        "Verified (us)",
        "Vp95 (us)",
        "Bypass (us)",
        "Bp95 (us)",
        "Overhead (us)"
    ));
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&format!(
            "{:<5} {:<24} {:>10.2} {:>15} {:>13} {:>13} {:>11} {:>13}\n",
            i + 1,
            row.page,
            row.size_bytes as f64 / (1024.0 * 1024.0),
            row.verified_median_us,
            row.verified_p95_us,
            row.bypass_median_us,
            row.bypass_p95_us,
            row.overhead_us
        ));
    }
    out
}
