//! Activity analysis: the append-only audit trail every exchange lands in,
//! the alarm log operators watch, and the report emitter that turns both
//! into summary, time-series, and chart files.
//!
//! The activity log is one record per line, tab-separated: the twelve
//! monitored fields in order (date, time, content type, page, session time,
//! request status, response status, intrusion flag, infected sub-server,
//! infected page, attack frequency, server reliability), followed by the
//! per-replica verification flags, the failure percent, and the action
//! column (`SubServer-<n>`, `REBOOT`, or `-`).

pub mod rankcorr;
pub mod report;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CdsError, Result};

/// Alarm severity tiers, ordered.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AlarmTier {
    LogOnly,
    Beep,
    HighBeep,
}

impl AlarmTier {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "log-only" => Ok(AlarmTier::LogOnly),
            "beep" => Ok(AlarmTier::Beep),
            "high-beep" => Ok(AlarmTier::HighBeep),
            other => Err(CdsError::Validation(format!(
                "unknown alarm tier {other:?}"
            ))),
        }
    }
}

impl fmt::Display for AlarmTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlarmTier::LogOnly => "log-only",
            AlarmTier::Beep => "beep",
            AlarmTier::HighBeep => "high-beep",
        })
    }
}

/// What ultimately answered (or would have answered) the exchange.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ServeAction {
    SubServer(u16),
    Reboot,
    None,
}

impl fmt::Display for ServeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServeAction::SubServer(id) => write!(f, "SubServer-{id}"),
            ServeAction::Reboot => f.write_str("REBOOT"),
            ServeAction::None => f.write_str("-"),
        }
    }
}

impl ServeAction {
    fn parse(s: &str) -> Result<Self> {
        if s == "-" {
            return Ok(ServeAction::None);
        }
        if s == "REBOOT" {
            return Ok(ServeAction::Reboot);
        }
        if let Some(id) = s.strip_prefix("SubServer-") {
            let id: u16 = id
                .parse()
                .map_err(|_| CdsError::Validation(format!("bad action {s:?}")))?;
            return Ok(ServeAction::SubServer(id));
        }
        Err(CdsError::Validation(format!("bad action {s:?}")))
    }
}

/// One audit row. Reliability is kept in basis points (0..=10000) so the
/// rendered four-decimal value round-trips exactly.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ActivityRecord {
    pub at_ms: u64,
    pub content_type: Option<String>,
    pub page: String,
    pub session_ms: u64,
    pub request_ok: bool,
    pub response_status: u16,
    pub intrusion: bool,
    pub infected_replica: Option<u16>,
    pub infected_page: Option<String>,
    pub attack_frequency: u64,
    pub reliability_bp: u16,
    pub replica_count: u16,
    /// Per-replica verification flags in id order; `None` when the exchange
    /// never reached verification (bad method, unknown page, operational row).
    pub flags: Option<Vec<bool>>,
    pub failure_percent: Option<u8>,
    pub action: ServeAction,
}

impl ActivityRecord {
    pub fn reliability(&self) -> f64 {
        self.reliability_bp as f64 / 10000.0
    }

    pub fn serialize_line(&self) -> String {
        let (date, time) = format_timestamp(self.at_ms);
        let mut cols: Vec<String> = vec![
            date,
            time,
            self.content_type.clone().unwrap_or_else(|| "-".to_string()),
            self.page.clone(),
            self.session_ms.to_string(),
            render_bool(self.request_ok),
            self.response_status.to_string(),
            render_bool(self.intrusion),
            self.infected_replica
                .map(|r| r.to_string())
                .unwrap_or_else(|| "-".to_string()),
            self.infected_page
                .clone()
                .unwrap_or_else(|| "-".to_string()),
            self.attack_frequency.to_string(),
            render_bp(self.reliability_bp),
        ];
        match &self.flags {
            Some(flags) => {
                debug_assert_eq!(flags.len(), self.replica_count as usize);
                cols.extend(flags.iter().map(|f| render_bool(*f)));
            }
            None => {
                cols.extend(std::iter::repeat_n("-".to_string(), self.replica_count as usize))
            }
        }
        cols.push(
            self.failure_percent
                .map(|p| p.to_string())
                .unwrap_or_else(|| "-".to_string()),
        );
        cols.push(self.action.to_string());
        cols.join("\t")
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 15 {
            return Err(CdsError::Validation(format!(
                "activity row has {} columns, need at least 15",
                cols.len()
            )));
        }
        let replica_count = (cols.len() - 14) as u16;
        let at_ms = parse_timestamp(cols[0], cols[1])?;
        let flag_cols = &cols[12..12 + replica_count as usize];
        let flags = if flag_cols.iter().all(|c| *c == "-") {
            None
        } else {
            Some(
                flag_cols
                    .iter()
                    .map(|c| parse_bool(c))
                    .collect::<Result<Vec<bool>>>()?,
            )
        };
        let percent_col = cols[cols.len() - 2];
        Ok(ActivityRecord {
            at_ms,
            content_type: opt_col(cols[2]).map(str::to_string),
            page: cols[3].to_string(),
            session_ms: parse_num(cols[4], "session time")?,
            request_ok: parse_bool(cols[5])?,
            response_status: parse_num(cols[6], "response status")? as u16,
            intrusion: parse_bool(cols[7])?,
            infected_replica: match opt_col(cols[8]) {
                Some(s) => Some(parse_num(s, "infected sub-server")? as u16),
                None => None,
            },
            infected_page: opt_col(cols[9]).map(str::to_string),
            attack_frequency: parse_num(cols[10], "attack frequency")?,
            reliability_bp: parse_bp(cols[11])?,
            replica_count,
            flags,
            failure_percent: match opt_col(percent_col) {
                Some(s) => Some(parse_num(s, "failure percent")? as u8),
                None => None,
            },
            action: ServeAction::parse(cols[cols.len() - 1])?,
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AlarmSubject {
    System,
    Replica(u16),
}

impl fmt::Display for AlarmSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlarmSubject::System => f.write_str("system"),
            AlarmSubject::Replica(id) => write!(f, "replica-{id}"),
        }
    }
}

impl AlarmSubject {
    fn parse(s: &str) -> Result<Self> {
        if s == "system" {
            return Ok(AlarmSubject::System);
        }
        if let Some(id) = s.strip_prefix("replica-") {
            if let Ok(id) = id.parse() {
                return Ok(AlarmSubject::Replica(id));
            }
        }
        Err(CdsError::Validation(format!("bad alarm subject {s:?}")))
    }
}

/// Operator-facing alarm row.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AlarmRecord {
    pub raised_at_ms: u64,
    pub tier: AlarmTier,
    pub failure_rate_bp: u16,
    pub subject: AlarmSubject,
    pub action_taken: String,
}

impl AlarmRecord {
    pub fn serialize_line(&self) -> String {
        let (date, time) = format_timestamp(self.raised_at_ms);
        format!(
            "{date}\t{time}\t{}\t{}\t{}\t{}",
            self.tier,
            render_bp(self.failure_rate_bp),
            self.subject,
            self.action_taken.replace(['\t', '\n'], " "),
        )
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 6 {
            return Err(CdsError::Validation(format!(
                "alarm row has {} columns, need 6",
                cols.len()
            )));
        }
        Ok(AlarmRecord {
            raised_at_ms: parse_timestamp(cols[0], cols[1])?,
            tier: AlarmTier::parse(cols[2])?,
            failure_rate_bp: parse_bp(cols[3])?,
            subject: AlarmSubject::parse(cols[4])?,
            action_taken: cols[5].to_string(),
        })
    }
}

pub const ACTIVITY_LOG: &str = "activity.log";
pub const ALARMS_LOG: &str = "alarms.log";
pub const REPORTS_LOG: &str = "reports.log";

struct LineLog {
    path: PathBuf,
    file: Option<fs::File>,
}

impl LineLog {
    fn open(path: PathBuf) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CdsError::io(format!("opening log {}", path.display()), e))?;
        Ok(LineLog {
            path,
            file: Some(file),
        })
    }

    fn append_line(&mut self, line: &str) -> std::io::Result<()> {
        let file = match self.file.as_mut() {
            Some(f) => f,
            None => return Ok(()),
        };
        file.write_all(line.as_bytes())?;
        file.write_all(b"\n")?;
        file.flush()
    }
}

/// The analyzer's three append-only logs. A write failure (disk full, log
/// volume gone) flips `analysis_disabled`: serving continues, analysis stops,
/// and a best-effort alarm records the transition.
pub struct LogSet {
    activity: LineLog,
    alarms: LineLog,
    reports: LineLog,
    pub analysis_disabled: bool,
}

impl LogSet {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| CdsError::io(format!("creating log dir {}", dir.display()), e))?;
        Ok(LogSet {
            activity: LineLog::open(dir.join(ACTIVITY_LOG))?,
            alarms: LineLog::open(dir.join(ALARMS_LOG))?,
            reports: LineLog::open(dir.join(REPORTS_LOG))?,
            analysis_disabled: false,
        })
    }

    pub fn activity_path(&self) -> &Path {
        &self.activity.path
    }

    pub fn append_activity(&mut self, record: &ActivityRecord) {
        if self.analysis_disabled {
            return;
        }
        if let Err(e) = self.activity.append_line(&record.serialize_line()) {
            self.disable_analysis(&e.to_string(), record.at_ms);
        }
    }

    pub fn append_alarm(&mut self, record: &AlarmRecord) {
        if self.analysis_disabled {
            return;
        }
        if let Err(e) = self.alarms.append_line(&record.serialize_line()) {
            self.disable_analysis(&e.to_string(), record.raised_at_ms);
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn append_report_row(
        &mut self,
        at_ms: u64,
        window_start_ms: u64,
        window_end_ms: u64,
        requests: u32,
        failures: u32,
        failure_rate_bp: u16,
        tier: AlarmTier,
    ) {
        if self.analysis_disabled {
            return;
        }
        let (date, time) = format_timestamp(at_ms);
        let line = format!(
            "{date}\t{time}\t{window_start_ms}\t{window_end_ms}\t{requests}\t{failures}\t{}\t{tier}",
            render_bp(failure_rate_bp),
        );
        if let Err(e) = self.reports.append_line(&line) {
            self.disable_analysis(&e.to_string(), at_ms);
        }
    }

    fn disable_analysis(&mut self, reason: &str, at_ms: u64) {
        self.analysis_disabled = true;
        let alarm = AlarmRecord {
            raised_at_ms: at_ms,
            tier: AlarmTier::HighBeep,
            failure_rate_bp: 0,
            subject: AlarmSubject::System,
            action_taken: format!("analysis disabled: {reason}"),
        };
        // the alarm volume may be just as dead; losing this line is acceptable
        let _ = self.alarms.append_line(&alarm.serialize_line());
        eprintln!("cds: analysis disabled: {reason}");
    }

    #[cfg(test)]
    fn with_files(activity: fs::File, alarms: fs::File, reports: fs::File) -> Self {
        LogSet {
            activity: LineLog {
                path: PathBuf::from("activity"),
                file: Some(activity),
            },
            alarms: LineLog {
                path: PathBuf::from("alarms"),
                file: Some(alarms),
            },
            reports: LineLog {
                path: PathBuf::from("reports"),
                file: Some(reports),
            },
            analysis_disabled: false,
        }
    }
}

/// Parse a whole activity log; malformed lines are skipped and counted, not
/// fatal — the log itself may have been attacked.
pub fn parse_activity_log(path: &Path) -> Result<(Vec<ActivityRecord>, u64)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CdsError::io(format!("reading activity log {}", path.display()), e))?;
    let mut records = Vec::new();
    let mut corrupt = 0u64;
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        match ActivityRecord::parse_line(line) {
            Ok(r) => records.push(r),
            Err(_) => corrupt += 1,
        }
    }
    Ok((records, corrupt))
}

pub fn parse_alarm_log(path: &Path) -> Result<Vec<AlarmRecord>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CdsError::io(format!("reading alarm log {}", path.display()), e))?;
    let mut records = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        if let Ok(r) = AlarmRecord::parse_line(line) {
            records.push(r);
        }
    }
    Ok(records)
}

fn render_bool(b: bool) -> String {
    if b { "TRUE" } else { "FALSE" }.to_string()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "TRUE" => Ok(true),
        "FALSE" => Ok(false),
        other => Err(CdsError::Validation(format!("bad flag {other:?}"))),
    }
}

fn opt_col(s: &str) -> Option<&str> {
    if s == "-" {
        None
    } else {
        Some(s)
    }
}

fn parse_num(s: &str, what: &str) -> Result<u64> {
    s.parse()
        .map_err(|_| CdsError::Validation(format!("bad {what} {s:?}")))
}

/// Basis points rendered as a fixed four-decimal fraction, e.g. 9900 -> "0.9900".
pub fn render_bp(bp: u16) -> String {
    format!("{}.{:04}", bp / 10000, bp % 10000)
}

fn parse_bp(s: &str) -> Result<u16> {
    let (whole, frac) = s
        .split_once('.')
        .ok_or_else(|| CdsError::Validation(format!("bad fraction {s:?}")))?;
    if frac.len() != 4 {
        return Err(CdsError::Validation(format!("bad fraction {s:?}")));
    }
    let whole: u16 = parse_num(whole, "fraction")? as u16;
    let frac: u16 = parse_num(frac, "fraction")? as u16;
    let bp = whole * 10000 + frac;
    if bp > 10000 {
        return Err(CdsError::Validation(format!("fraction {s:?} out of range")));
    }
    Ok(bp)
}

/// Fraction in [0,1] to basis points, round-to-nearest.
pub fn to_bp(rate: f64) -> u16 {
    (rate.clamp(0.0, 1.0) * 10000.0).round() as u16
}

// Civil-calendar conversion (proleptic Gregorian, UTC).

pub fn format_timestamp(at_ms: u64) -> (String, String) {
    let days = (at_ms / 86_400_000) as i64;
    let ms_of_day = at_ms % 86_400_000;
    let (y, m, d) = civil_from_days(days);
    let date = format!("{y:04}-{m:02}-{d:02}");
    let time = format!(
        "{:02}:{:02}:{:02}.{:03}",
        ms_of_day / 3_600_000,
        ms_of_day % 3_600_000 / 60_000,
        ms_of_day % 60_000 / 1000,
        ms_of_day % 1000
    );
    (date, time)
}

pub fn parse_timestamp(date: &str, time: &str) -> Result<u64> {
    let bad = || CdsError::Validation(format!("bad timestamp {date:?} {time:?}"));
    let mut dp = date.split('-');
    let (y, m, d) = match (dp.next(), dp.next(), dp.next(), dp.next()) {
        (Some(y), Some(m), Some(d), None) => (
            y.parse::<i64>().map_err(|_| bad())?,
            m.parse::<u32>().map_err(|_| bad())?,
            d.parse::<u32>().map_err(|_| bad())?,
        ),
        _ => return Err(bad()),
    };
    let (hms, ms) = time.split_once('.').ok_or_else(bad)?;
    let mut tp = hms.split(':');
    let (h, mi, s) = match (tp.next(), tp.next(), tp.next(), tp.next()) {
        (Some(h), Some(mi), Some(s), None) => (
            h.parse::<u64>().map_err(|_| bad())?,
            mi.parse::<u64>().map_err(|_| bad())?,
            s.parse::<u64>().map_err(|_| bad())?,
        ),
        _ => return Err(bad()),
    };
    let ms: u64 = ms.parse().map_err(|_| bad())?;
    let days = days_from_civil(y, m, d);
    if days < 0 {
        return Err(bad());
    }
    Ok(days as u64 * 86_400_000 + h * 3_600_000 + mi * 60_000 + s * 1000 + ms)
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = (z - era * 146_097) as u64;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe as i64 + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = if m > 2 { m - 3 } else { m + 9 } as u64;
    let doy = (153 * mp + 2) / 5 + d as u64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe as i64 - 719_468
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_record() -> ActivityRecord {
        ActivityRecord {
            at_ms: 1_733_200_000_123,
            content_type: Some("text/html".to_string()),
            page: "/index.html".to_string(),
            session_ms: 12,
            request_ok: true,
            response_status: 200,
            intrusion: false,
            infected_replica: None,
            infected_page: None,
            attack_frequency: 0,
            reliability_bp: 10000,
            replica_count: 3,
            flags: Some(vec![true, true, true]),
            failure_percent: Some(0),
            action: ServeAction::SubServer(1),
        }
    }

    #[test]
    fn timestamp_rendering_known_values() {
        let (date, time) = format_timestamp(0);
        assert_eq!(date, "1970-01-01");
        assert_eq!(time, "00:00:00.000");
        // 2024-12-03 04:26:40.123 UTC
        let (date, time) = format_timestamp(1_733_200_000_123);
        assert_eq!(date, "2024-12-03");
        assert_eq!(time, "04:26:40.123");
    }

    #[test]
    fn timestamp_round_trip() {
        for at in [
            0u64,
            1,
            999,
            86_400_000,
            1_733_200_000_123,
            4_102_444_800_000,
        ] {
            let (d, t) = format_timestamp(at);
            assert_eq!(parse_timestamp(&d, &t).unwrap(), at);
        }
    }

    #[test]
    fn record_serialize_parse_identity() {
        let clean = sample_record();
        assert_eq!(
            ActivityRecord::parse_line(&clean.serialize_line()).unwrap(),
            clean
        );

        let reboot_row = ActivityRecord {
            intrusion: true,
            infected_replica: Some(2),
            infected_page: Some("/index.html".to_string()),
            attack_frequency: 1,
            reliability_bp: 9900,
            flags: Some(vec![false, false, false]),
            failure_percent: Some(100),
            action: ServeAction::Reboot,
            ..sample_record()
        };
        assert_eq!(
            ActivityRecord::parse_line(&reboot_row.serialize_line()).unwrap(),
            reboot_row
        );

        let unverified = ActivityRecord {
            content_type: None,
            response_status: 405,
            flags: None,
            failure_percent: None,
            action: ServeAction::None,
            ..sample_record()
        };
        assert_eq!(
            ActivityRecord::parse_line(&unverified.serialize_line()).unwrap(),
            unverified
        );
    }

    #[test]
    fn clean_row_matches_expected_shape() {
        let line = sample_record().serialize_line();
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 12 + 3 + 2);
        assert_eq!(&cols[12..15], &["TRUE", "TRUE", "TRUE"]);
        assert_eq!(cols[15], "0");
        assert_eq!(cols[16], "SubServer-1");
    }

    #[test]
    fn malformed_lines_are_counted_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("activity.log");
        let good = sample_record().serialize_line();
        fs::write(&path, format!("{good}\ngarbage line\n{good}\n")).unwrap();
        let (records, corrupt) = parse_activity_log(&path).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(corrupt, 1);
    }

    #[test]
    fn alarm_round_trip() {
        let alarm = AlarmRecord {
            raised_at_ms: 5000,
            tier: AlarmTier::Beep,
            failure_rate_bp: 1000,
            subject: AlarmSubject::System,
            action_taken: "beep-alert".to_string(),
        };
        assert_eq!(
            AlarmRecord::parse_line(&alarm.serialize_line()).unwrap(),
            alarm
        );
    }

    #[test]
    fn many_appends_then_reload() {
        let dir = tempfile::tempdir().unwrap();
        let mut logs = LogSet::open(dir.path()).unwrap();
        for i in 0..1000u64 {
            let mut r = sample_record();
            r.at_ms = i;
            r.session_ms = i;
            logs.append_activity(&r);
        }
        let (records, corrupt) = parse_activity_log(&dir.path().join(ACTIVITY_LOG)).unwrap();
        assert_eq!(records.len(), 1000);
        assert_eq!(corrupt, 0);
        assert_eq!(records[999].session_ms, 999);

        // byte-stable across a second identical run
        let first = fs::read(dir.path().join(ACTIVITY_LOG)).unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let mut logs2 = LogSet::open(dir2.path()).unwrap();
        for i in 0..1000u64 {
            let mut r = sample_record();
            r.at_ms = i;
            r.session_ms = i;
            logs2.append_activity(&r);
        }
        assert_eq!(first, fs::read(dir2.path().join(ACTIVITY_LOG)).unwrap());
    }

    #[test]
    fn write_failure_disables_analysis_but_not_service() {
        let dir = tempfile::tempdir().unwrap();
        let ro = |name: &str| {
            let p = dir.path().join(name);
            fs::write(&p, b"").unwrap();
            fs::OpenOptions::new().read(true).open(&p).unwrap() // read-only handle
        };
        let mut logs = LogSet::with_files(ro("a"), ro("b"), ro("c"));
        logs.append_activity(&sample_record());
        assert!(logs.analysis_disabled);
        // further appends are silent no-ops
        logs.append_activity(&sample_record());
        logs.append_alarm(&AlarmRecord {
            raised_at_ms: 0,
            tier: AlarmTier::Beep,
            failure_rate_bp: 0,
            subject: AlarmSubject::System,
            action_taken: "x".to_string(),
        });
    }

    #[test]
    fn bp_rendering() {
        assert_eq!(render_bp(0), "0.0000");
        assert_eq!(render_bp(10000), "1.0000");
        assert_eq!(render_bp(9901), "0.9901");
        assert_eq!(parse_bp("0.9901").unwrap(), 9901);
        assert!(parse_bp("1.5000").is_err());
        assert_eq!(to_bp(0.5), 5000);
    }
}
