//! Page-path normalization. A page path is the store key: it always begins
//! with "/", carries no "." or ".." segments and no duplicate slashes, and is
//! valid UTF-8 with no control characters. Request targets are additionally
//! percent-decoded exactly once before normalization, so an encoded alias can
//! never bypass verification by naming the same file a second way.

use std::fmt;
use std::path::PathBuf;

use crate::error::{CdsError, Result};

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PagePath(String);

impl PagePath {
    /// Normalize an HTTP request target (query string already stripped).
    /// Percent-escapes are decoded once, then the common rules apply.
    pub fn from_request(raw: &str) -> Result<Self> {
        let decoded = percent_decode(raw)?;
        let decoded = String::from_utf8(decoded).map_err(|_| CdsError::BadPath {
            raw: raw.to_string(),
            reason: "percent-decoded path is not valid UTF-8".to_string(),
        })?;
        Self::normalize(raw, &decoded)
    }

    /// Normalize a provisioning-time relative file path (no percent decoding;
    /// on-disk names are taken literally).
    pub fn from_provision(rel: &str) -> Result<Self> {
        let raw = format!("/{}", rel.trim_start_matches('/'));
        Self::normalize(&raw, &raw.clone())
    }

    fn normalize(raw: &str, candidate: &str) -> Result<Self> {
        let bad = |reason: &str| CdsError::BadPath {
            raw: raw.to_string(),
            reason: reason.to_string(),
        };
        if !candidate.starts_with('/') {
            return Err(bad("must begin with '/'"));
        }
        if candidate.chars().any(|c| c.is_control()) {
            return Err(bad("control characters not allowed"));
        }
        let trailing_slash = candidate.len() > 1 && candidate.ends_with('/');
        let mut segments = Vec::new();
        for seg in candidate.split('/') {
            match seg {
                "" | "." => continue, // collapse duplicate slashes and self refs
                ".." => return Err(bad("'..' segments not allowed")),
                s => segments.push(s),
            }
        }
        let mut out = String::from("/");
        out.push_str(&segments.join("/"));
        if trailing_slash && out.len() > 1 {
            out.push('/');
        }
        Ok(PagePath(out))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Relative filesystem path under a content root.
    pub fn fs_rel(&self) -> PathBuf {
        PathBuf::from(self.0.trim_start_matches('/'))
    }
}

impl fmt::Display for PagePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Decode %XX escapes exactly once. Malformed escapes are rejected rather
/// than passed through.
fn percent_decode(s: &str) -> Result<Vec<u8>> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hi = bytes.get(i + 1).copied();
            let lo = bytes.get(i + 2).copied();
            match (hi.and_then(hex_nibble), lo.and_then(hex_nibble)) {
                (Some(h), Some(l)) => {
                    out.push((h << 4) | l);
                    i += 3;
                }
                _ => {
                    return Err(CdsError::BadPath {
                        raw: s.to_string(),
                        reason: "malformed percent escape".to_string(),
                    })
                }
            }
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    Ok(out)
}

fn hex_nibble(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}
