//! Error type shared across the store, replica, controller, and gateway layers.

use std::fmt;
use std::io;

pub type Result<T> = std::result::Result<T, CdsError>;

#[derive(Debug)]
pub enum CdsError {
    /// I/O failure, tagged with what was being done when it happened.
    Io {
        context: String,
        source: io::Error,
    },
    /// No hash-store record for the requested page (and replica slot).
    RecordMissing {
        page_path: String,
        replica_id: Option<u16>,
    },
    /// The store was provisioned under a different key than the one supplied.
    KeyMismatch,
    /// A replica's on-disk copy of the page is absent or unreadable.
    PageMissing {
        replica_id: u16,
        page_path: String,
    },
    /// A single-file heal could not restore the replica copy.
    HealFailed {
        replica_id: u16,
        page_path: String,
        reason: String,
    },
    /// Full re-materialization of a replica failed; the replica stays isolated.
    RebootFailed {
        replica_id: u16,
        reason: String,
    },
    /// Every replica is isolated; nothing can serve.
    NoReplicaAvailable,
    /// An alert was raised with a kind that has no configured weight.
    UnknownAlertKind(String),
    /// A request target or provisioned path failed normalization.
    BadPath {
        raw: String,
        reason: String,
    },
    /// Two provisioned files normalize to the same page path.
    DuplicatePath(String),
    /// The hash-store file is corrupt or has an unsupported layout.
    StoreFormat(String),
    Config(String),
    Validation(String),
}

impl CdsError {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CdsError::Io {
            context: context.into(),
            source,
        }
    }
}

impl fmt::Display for CdsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CdsError::Io { context, source } => write!(f, "{context}: {source}"),
            CdsError::RecordMissing {
                page_path,
                replica_id,
            } => match replica_id {
                Some(id) => write!(f, "record-missing: {page_path} (replica {id})"),
                None => write!(f, "record-missing: {page_path}"),
            },
            CdsError::KeyMismatch => {
                write!(f, "key-mismatch: store key fingerprint does not match")
            }
            CdsError::PageMissing {
                replica_id,
                page_path,
            } => write!(f, "page-missing: replica {replica_id} has no {page_path}"),
            CdsError::HealFailed {
                replica_id,
                page_path,
                reason,
            } => write!(f, "heal-failed: replica {replica_id} {page_path}: {reason}"),
            CdsError::RebootFailed { replica_id, reason } => {
                write!(f, "reboot-failed: replica {replica_id}: {reason}")
            }
            CdsError::NoReplicaAvailable => write!(f, "no-replica-available"),
            CdsError::UnknownAlertKind(kind) => write!(f, "unknown alert kind: {kind}"),
            CdsError::BadPath { raw, reason } => write!(f, "bad path {raw:?}: {reason}"),
            CdsError::DuplicatePath(path) => {
                write!(f, "duplicate normalized page path: {path}")
            }
            CdsError::StoreFormat(msg) => write!(f, "hash-store format error: {msg}"),
            CdsError::Config(msg) => write!(f, "config error: {msg}"),
            CdsError::Validation(msg) => write!(f, "validation error: {msg}"),
        }
    }
}

impl std::error::Error for CdsError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CdsError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
