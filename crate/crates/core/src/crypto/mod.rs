//! The two primitives everything else leans on: MD5 digest generation for
//! page fingerprints and AES-128 single-block encryption for protecting the
//! stored hash codes. Both are implemented here from the public algorithm
//! specifications so the byte-exact store format has no external moving parts.
//!
//! A stored hash code is exactly one cipher block: the 16-octet MD5 digest is
//! encrypted as a single raw AES block, no chaining mode, no padding.
//!
//! MD5 is retained as the fingerprint function because it is what the store
//! format carries; it sits behind [`md5_digest`] alone so it can be swapped.

mod aes;
mod md5;

pub use aes::{aes128_decrypt_block, aes128_encrypt_block, AesKey128};
pub use md5::md5_digest;

use std::fmt;

use crate::error::{CdsError, Result};

/// A 128-bit value: an MD5 digest or an AES block. Renders as exactly 32
/// lowercase hex characters.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Digest128([u8; 16]);

impl Digest128 {
    pub const LEN: usize = 16;

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Digest128(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(32);
        for b in self.0 {
            s.push(HEX_DIGITS[(b >> 4) as usize] as char);
            s.push(HEX_DIGITS[(b & 0x0f) as usize] as char);
        }
        s
    }

    /// Parses exactly 32 hex characters (either case accepted on input).
    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.len() != 32 {
            return Err(CdsError::Validation(format!(
                "digest hex must be 32 characters, got {}",
                s.len()
            )));
        }
        let mut out = [0u8; 16];
        let bytes = s.as_bytes();
        for (i, chunk) in bytes.chunks_exact(2).enumerate() {
            let hi = hex_val(chunk[0])?;
            let lo = hex_val(chunk[1])?;
            out[i] = (hi << 4) | lo;
        }
        Ok(Digest128(out))
    }
}

const HEX_DIGITS: &[u8; 16] = b"0123456789abcdef";

fn hex_val(c: u8) -> Result<u8> {
    match c {
        b'0'..=b'9' => Ok(c - b'0'),
        b'a'..=b'f' => Ok(c - b'a' + 10),
        b'A'..=b'F' => Ok(c - b'A' + 10),
        _ => Err(CdsError::Validation(format!(
            "invalid hex character {:?}",
            c as char
        ))),
    }
}

impl fmt::Display for Digest128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest128 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest128({})", self.to_hex())
    }
}
