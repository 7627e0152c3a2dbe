//! Per-replica trust: an accumulated weighted alert level drives a replica
//! through trustworthy, suspected, and corrupted, and the state fixes its
//! selection priority. Level zero is trustworthy; anything up to the
//! corruption threshold is suspected; above it, corrupted — which is
//! transient, because the intrusion manager immediately reboots (back to
//! trustworthy) or demotes (back to suspected at the threshold).

use std::fmt;

use crate::replicas::ReplicaId;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TrustState {
    Trustworthy,
    Suspected,
    Corrupted,
}

impl fmt::Display for TrustState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrustState::Trustworthy => "trustworthy",
            TrustState::Suspected => "suspected",
            TrustState::Corrupted => "corrupted",
        })
    }
}

/// Selection priority; trustworthy replicas are tried first.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum Priority {
    High,
    Medium,
    Low,
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Priority::High => "high",
            Priority::Medium => "medium",
            Priority::Low => "low",
        })
    }
}

pub fn state_for_level(alert_level: u32, tc: u32) -> TrustState {
    if alert_level == 0 {
        TrustState::Trustworthy
    } else if alert_level <= tc {
        TrustState::Suspected
    } else {
        TrustState::Corrupted
    }
}

pub fn priority_for(state: TrustState) -> Priority {
    match state {
        TrustState::Trustworthy => Priority::High,
        TrustState::Suspected => Priority::Medium,
        TrustState::Corrupted => Priority::Low,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ReplicaTrust {
    pub replica_id: ReplicaId,
    pub alert_level: u32,
    pub state: TrustState,
    pub priority: Priority,
}

impl ReplicaTrust {
    pub fn from_level(replica_id: ReplicaId, alert_level: u32, tc: u32) -> Self {
        let state = state_for_level(alert_level, tc);
        ReplicaTrust {
            replica_id,
            alert_level,
            state,
            priority: priority_for(state),
        }
    }
}
