//! Intrusion-tolerant content server.
//!
//! Every HTTP response is verified against an encrypted store of page
//! fingerprints across redundant content replicas before a byte leaves the
//! server. Corrupted replica files are healed from a golden copy or the
//! replica is rebooted outright, a controller tracks per-replica trust and
//! failure-rate alarms, and a deterministic harness injects corruption to
//! prove the whole pipeline end to end.

pub mod analyzer;
pub mod clock;
pub mod controller;
pub mod crypto;
pub mod error;
pub mod gateway;
pub mod harness;
pub mod hashstore;
pub mod replicas;
pub mod traces;

pub use error::{CdsError, Result};
