//! Report emitter: turns an activity log into a summary table, a per-window
//! failure-rate time series, and a self-contained SVG chart. Rendering is
//! fully deterministic — the same log always produces byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{parse_activity_log, parse_alarm_log, ActivityRecord, AlarmTier};
use crate::error::{CdsError, Result};

pub const SUMMARY_FILE: &str = "summary.txt";
pub const TIMESERIES_FILE: &str = "failure_rate.csv";
pub const CHART_FILE: &str = "chart.svg";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSummary {
    pub exchanges: u64,
    pub verified_requests: u64,
    pub intrusions: u64,
    pub reboots: u64,
    /// Verification failures observed per replica id (FALSE flags).
    pub attacks_per_replica: BTreeMap<u16, u64>,
    pub alarms_per_tier: BTreeMap<AlarmTier, u64>,
    pub current_reliability_bp: u16,
    pub corrupt_lines: u64,
}

struct WindowRow {
    index: usize,
    requests: u32,
    failures: u32,
}

impl WindowRow {
    fn rate(&self) -> f64 {
        self.failures as f64 / self.requests as f64
    }
}

/// Read `log_path`, write the three report files into `out_dir`, and return
/// the computed summary. `window` is the request count per time-series
/// bucket. An `alarms.log` next to the activity log is included when present.
pub fn emit_report(log_path: &Path, out_dir: &Path, window: u32) -> Result<ReportSummary> {
    if window == 0 {
        return Err(CdsError::Validation("window must be positive".to_string()));
    }
    let (records, corrupt_lines) = parse_activity_log(log_path)?;
    let alarms_path = sibling(log_path, super::ALARMS_LOG);
    let alarms = if alarms_path.exists() {
        parse_alarm_log(&alarms_path)?
    } else {
        Vec::new()
    };

    let mut summary = ReportSummary {
        exchanges: records.len() as u64,
        verified_requests: 0,
        intrusions: 0,
        reboots: 0,
        attacks_per_replica: BTreeMap::new(),
        alarms_per_tier: BTreeMap::new(),
        current_reliability_bp: 10000,
        corrupt_lines,
    };
    for a in &alarms {
        *summary.alarms_per_tier.entry(a.tier).or_insert(0) += 1;
    }

    // verified requests drive the failure-rate windows; primary = first
    // replica actually checked, inferred from the flags in id order
    let mut windows: Vec<WindowRow> = Vec::new();
    let mut current = WindowRow {
        index: 0,
        requests: 0,
        failures: 0,
    };
    for r in &records {
        if r.intrusion {
            summary.intrusions += 1;
        }
        if matches!(r.action, super::ServeAction::Reboot) {
            summary.reboots += 1;
        }
        if let Some(flags) = &r.flags {
            for (i, ok) in flags.iter().enumerate() {
                if !ok {
                    *summary.attacks_per_replica.entry(i as u16 + 1).or_insert(0) += 1;
                }
            }
            if r.response_status == 200 {
                summary.verified_requests += 1;
                current.requests += 1;
                if primary_failed(r) {
                    current.failures += 1;
                }
                if current.requests == window {
                    let index = current.index;
                    windows.push(current);
                    current = WindowRow {
                        index: index + 1,
                        requests: 0,
                        failures: 0,
                    };
                }
            }
        }
        summary.current_reliability_bp = r.reliability_bp;
    }
    let partial = if current.requests > 0 {
        Some(current)
    } else {
        None
    };

    fs::create_dir_all(out_dir)
        .map_err(|e| CdsError::io(format!("creating report dir {}", out_dir.display()), e))?;
    write_file(
        &out_dir.join(SUMMARY_FILE),
        &render_summary(&summary, window),
    )?;
    write_file(
        &out_dir.join(TIMESERIES_FILE),
        &render_timeseries(&windows, partial.as_ref()),
    )?;
    write_file(
        &out_dir.join(CHART_FILE),
        &render_chart(&windows, partial.as_ref(), &summary),
    )?;
    Ok(summary)
}

fn primary_failed(r: &ActivityRecord) -> bool {
    // Flags render in id order and cannot recover check order, but a FALSE
    // flag only ever appears on a replica checked before the serving one, so
    // any FALSE means the first-checked replica did not serve cleanly.
    r.flags
        .as_ref()
        .map(|f| f.iter().any(|ok| !ok))
        .unwrap_or(false)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    match path.parent() {
        Some(p) => p.join(name),
        None => PathBuf::from(name),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)
        .map_err(|e| CdsError::io(format!("writing report file {}", path.display()), e))
}

fn render_summary(s: &ReportSummary, window: u32) -> String {
    let mut out = String::new();
    out.push_str("cds activity summary\n");
    out.push_str("====================\n");
    out.push_str(&format!("exchanges:            {}\n", s.exchanges));
    out.push_str(&format!("verified requests:    {}\n", s.verified_requests));
    out.push_str(&format!("intrusion exchanges:  {}\n", s.intrusions));
    out.push_str(&format!("reboot actions:       {}\n", s.reboots));
    out.push_str(&format!("window size:          {window}\n"));
    out.push_str(&format!(
        "current reliability:  {}\n",
        super::render_bp(s.current_reliability_bp)
    ));
    out.push_str(&format!("corrupt lines:        {}\n", s.corrupt_lines));
    out.push_str("\nattack frequency per replica\n");
    if s.attacks_per_replica.is_empty() {
        out.push_str("  (none)\n");
    }
    for (replica, count) in &s.attacks_per_replica {
        out.push_str(&format!("  replica-{replica}: {count}\n"));
    }
    out.push_str("\nalarms per tier\n");
    for tier in [AlarmTier::LogOnly, AlarmTier::Beep, AlarmTier::HighBeep] {
        out.push_str(&format!(
            "  {tier}: {}\n",
            s.alarms_per_tier.get(&tier).copied().unwrap_or(0)
        ));
    }
    out
}

fn render_timeseries(windows: &[WindowRow], partial: Option<&WindowRow>) -> String {
    let mut out = String::from("window,requests,failures,failure_rate\n");
    for w in windows.iter().chain(partial) {
        out.push_str(&format!(
            "{},{},{},{:.4}\n",
            w.index,
            w.requests,
            w.failures,
            w.rate()
        ));
    }
    out
}

// Minimal hand-rolled SVG: failure-rate line on top, per-replica attack
// frequency bars below. No external assets, no timestamps, stable output.
fn render_chart(windows: &[WindowRow], partial: Option<&WindowRow>, s: &ReportSummary) -> String {
    const W: f64 = 900.0;
    const PANEL_H: f64 = 220.0;
    const MARGIN: f64 = 50.0;
    let total_h = PANEL_H * 2.0 + MARGIN * 3.0;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{total_h}\" \
         viewBox=\"0 0 {W} {total_h}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // panel 1: failure rate per window
    let rows: Vec<&WindowRow> = windows.iter().chain(partial).collect();
    let x0 = MARGIN;
    let y0 = MARGIN;
    let plot_w = W - 2.0 * MARGIN;
    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\">failure rate per window</text>\n",
        y0 - 10.0
    ));
    svg.push_str(&frame(x0, y0, plot_w, PANEL_H));
    if !rows.is_empty() {
        let step = plot_w / rows.len().max(1) as f64;
        let mut points = Vec::new();
        for (i, w) in rows.iter().enumerate() {
            let x = x0 + step * (i as f64 + 0.5);
            let y = y0 + PANEL_H * (1.0 - w.rate());
            points.push(format!("{x:.1},{y:.1}"));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        ));
    } else {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#888\">no completed windows</text>\n",
            x0 + 10.0,
            y0 + PANEL_H / 2.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\">1.0</text><text x=\"{:.1}\" y=\"{:.1}\">0.0</text>\n",
        x0 - 35.0,
        y0 + 12.0,
        x0 - 35.0,
        y0 + PANEL_H
    ));

    // panel 2: attack frequency per replica
    let y1 = y0 + PANEL_H + MARGIN;
    svg.push_str(&format!(
        "<text x=\"{x0}\" y=\"{}\">attack frequency per replica</text>\n",
        y1 - 10.0
    ));
    svg.push_str(&frame(x0, y1, plot_w, PANEL_H));
    let max_count = s.attacks_per_replica.values().copied().max().unwrap_or(0);
    if max_count > 0 {
        let n = s.attacks_per_replica.len() as f64;
        let band = plot_w / n;
        for (i, (replica, count)) in s.attacks_per_replica.iter().enumerate() {
            let h = PANEL_H * (*count as f64 / max_count as f64);
            let x = x0 + band * i as f64 + band * 0.2;
            let y = y1 + PANEL_H - h;
            svg.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"#2980b9\"/>\n",
                band * 0.6
            ));
            svg.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\">r{replica}: {count}</text>\n",
                x,
                y1 + PANEL_H + 16.0
            ));
        }
    } else {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" fill=\"#888\">no attacks recorded</text>\n",
            x0 + 10.0,
            y1 + PANEL_H / 2.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

fn frame(x: f64, y: f64, w: f64, h: f64) -> String {
    format!(
        "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" \
         fill=\"none\" stroke=\"#333\"/>\n"
    )
}
