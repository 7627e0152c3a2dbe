//! Verification verdicts and windowed failure-rate assessment.

use std::fmt;

use crate::analyzer::{to_bp, AlarmTier};
use crate::replicas::ReplicaId;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ServedBy {
    Replica(ReplicaId),
    /// No replica matched; every replica was rebooted and the golden copy served.
    Reboot,
}

impl fmt::Display for ServedBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ServedBy::Replica(id) => write!(f, "SubServer-{id}"),
            ServedBy::Reboot => f.write_str("REBOOT"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReplicaCheck {
    pub replica_id: ReplicaId,
    pub matched: bool,
}

/// Everything one verification pass decided, in check order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VerdictTrace {
    pub page_path: String,
    pub checks: Vec<ReplicaCheck>,
    pub served_by: ServedBy,
    /// Replicas healed during this request, in check order.
    pub healed: Vec<ReplicaId>,
    pub duration_ms: u64,
    pub at_ms: u64,
}

impl VerdictTrace {
    /// The primary is the first replica actually checked.
    pub fn primary_failed(&self) -> bool {
        self.checks.first().map(|c| !c.matched).unwrap_or(false)
    }

    pub fn any_mismatch(&self) -> bool {
        self.checks.iter().any(|c| !c.matched)
    }

    pub fn first_mismatch(&self) -> Option<ReplicaId> {
        self.checks
            .iter()
            .find(|c| !c.matched)
            .map(|c| c.replica_id)
    }

    /// Per-replica flags in id order for the audit row: FALSE only for a
    /// replica that was checked and mismatched. Unchecked replicas render
    /// TRUE — verification stops at the first match and holds nothing
    /// against the rest.
    pub fn flags(&self, replica_count: u16) -> Vec<bool> {
        let mut flags = vec![true; replica_count as usize];
        for check in &self.checks {
            let idx = (check.replica_id.0 as usize).saturating_sub(1);
            if idx < flags.len() {
                flags[idx] = check.matched;
            }
        }
        flags
    }

    /// Percentage of replicas flagged FALSE, rounded to whole percent.
    pub fn failure_percent(&self, replica_count: u16) -> u8 {
        if replica_count == 0 {
            return 0;
        }
        let failed = self.flags(replica_count).iter().filter(|ok| !**ok).count();
        ((failed * 100) as f64 / replica_count as f64).round() as u8
    }
}

/// Windowed failure rate with its alarm tier.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct FailureReport {
    pub window_start_ms: u64,
    pub window_end_ms: u64,
    pub requests: u32,
    pub failures: u32,
    pub failure_rate: f64,
    pub tier: AlarmTier,
}

impl FailureReport {
    pub fn failure_rate_bp(&self) -> u16 {
        to_bp(self.failure_rate)
    }
}

/// Tier partition of [0,1]: strictly below `th_low` is log-only, strictly
/// above `th_high` is the higher beep, and both boundary rates fall in the
/// middle beep band.
pub fn tier_for_rate(rate: f64, th_low: f64, th_high: f64) -> AlarmTier {
    if rate < th_low {
        AlarmTier::LogOnly
    } else if rate <= th_high {
        AlarmTier::Beep
    } else {
        AlarmTier::HighBeep
    }
}

/// Assess a non-empty window of verdicts: the failure rate counts requests
/// whose primary replica mismatched.
pub fn assess_failure_rate(verdicts: &[VerdictTrace], th_low: f64, th_high: f64) -> FailureReport {
    assert!(
        !verdicts.is_empty(),
        "failure-rate window must be non-empty"
    );
    let requests = verdicts.len() as u32;
    let failures = verdicts.iter().filter(|v| v.primary_failed()).count() as u32;
    let failure_rate = failures as f64 / requests as f64;
    FailureReport {
        window_start_ms: verdicts.first().unwrap().at_ms,
        window_end_ms: verdicts.last().unwrap().at_ms,
        requests,
        failures,
        failure_rate,
        tier: tier_for_rate(failure_rate, th_low, th_high),
    }
}
