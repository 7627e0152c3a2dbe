//! Persistent store of encrypted per-page, per-replica MD5 hash codes, plus
//! provisioning of the golden tree into replica content directories.
//!
//! On-disk layout (single file, little-endian):
//!
//! ```text
//! magic "CDSH" | version u16 | replica_count u16 | entry_count u32
//!             | key_fingerprint 16 octets | entries...
//! entry: path_len u16 | path UTF-8 | replica_count x 16-octet cipher digests
//! ```
//!
//! Cipher digests are stored in replica order 1..N. The key fingerprint is
//! the MD5 of the raw store key and exists only to detect a wrong key early;
//! the store never validates content itself — mismatches are the verification
//! layer's business.

mod golden;
mod path;

pub use golden::{content_type_for, GoldenStore, TYPES_MANIFEST};
pub use path::PagePath;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::crypto::{aes128_decrypt_block, aes128_encrypt_block, md5_digest, AesKey128, Digest128};
use crate::error::{CdsError, Result};
use crate::replicas::ReplicaId;

const MAGIC: &[u8; 4] = b"CDSH";
const FORMAT_VERSION: u16 = 1;

/// One content path's encrypted digest entry for one replica slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PageRecord {
    pub page_path: PagePath,
    pub replica_id: ReplicaId,
    pub cipher_digest: Digest128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreManifest {
    pub version: u16,
    pub replica_count: u16,
    pub entry_count: u32,
    pub key_fingerprint: Digest128,
}

pub struct HashStore {
    manifest: StoreManifest,
    // page path -> cipher digests indexed by replica slot (id - 1)
    records: BTreeMap<String, Vec<Digest128>>,
}

impl HashStore {
    pub fn open(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)
            .map_err(|e| CdsError::io(format!("reading hash store {}", path.display()), e))?;
        Self::decode(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())
            .map_err(|e| CdsError::io(format!("writing hash store {}", path.display()), e))
    }

    fn decode(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(CdsError::StoreFormat("bad magic".to_string()));
        }
        let version = cur.u16()?;
        if version != FORMAT_VERSION {
            return Err(CdsError::StoreFormat(format!(
                "unsupported version {version}"
            )));
        }
        let replica_count = cur.u16()?;
        if replica_count == 0 {
            return Err(CdsError::StoreFormat("replica_count is zero".to_string()));
        }
        let entry_count = cur.u32()?;
        let key_fingerprint = Digest128::from_bytes(cur.take(16)?.try_into().unwrap());

        let mut records = BTreeMap::new();
        for _ in 0..entry_count {
            let path_len = cur.u16()? as usize;
            let raw = cur.take(path_len)?;
            let page = std::str::from_utf8(raw)
                .map_err(|_| CdsError::StoreFormat("entry path is not UTF-8".to_string()))?
                .to_string();
            let mut digests = Vec::with_capacity(replica_count as usize);
            for _ in 0..replica_count {
                digests.push(Digest128::from_bytes(cur.take(16)?.try_into().unwrap()));
            }
            if records.insert(page.clone(), digests).is_some() {
                return Err(CdsError::StoreFormat(format!("duplicate entry {page}")));
            }
        }
        if cur.pos != bytes.len() {
            return Err(CdsError::StoreFormat(format!(
                "{} trailing bytes",
                bytes.len() - cur.pos
            )));
        }
        Ok(HashStore {
            manifest: StoreManifest {
                version,
                replica_count,
                entry_count,
                key_fingerprint,
            },
            records,
        })
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.manifest.version.to_le_bytes());
        out.extend_from_slice(&self.manifest.replica_count.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        out.extend_from_slice(self.manifest.key_fingerprint.as_bytes());
        for (page, digests) in &self.records {
            out.extend_from_slice(&(page.len() as u16).to_le_bytes());
            out.extend_from_slice(page.as_bytes());
            for d in digests {
                out.extend_from_slice(d.as_bytes());
            }
        }
        out
    }

    pub fn manifest(&self) -> &StoreManifest {
        &self.manifest
    }

    pub fn contains_page(&self, page: &PagePath) -> bool {
        self.records.contains_key(page.as_str())
    }

    pub fn pages(&self) -> impl Iterator<Item = PagePath> + '_ {
        self.records
            .keys()
            .map(|k| PagePath::from_provision(k).expect("stored page path is normalized"))
    }

    pub fn entry_count(&self) -> u32 {
        self.records.len() as u32
    }

    /// Decrypt and return the expected MD5 for a (page, replica) pair.
    /// Fails fast with `KeyMismatch` when the supplied key's fingerprint does
    /// not match the one recorded at provisioning.
    pub fn lookup_expected(
        &self,
        page: &PagePath,
        replica_id: ReplicaId,
        store_key: &AesKey128,
    ) -> Result<Digest128> {
        if md5_digest(store_key.key_bytes()) != self.manifest.key_fingerprint {
            return Err(CdsError::KeyMismatch);
        }
        let digests = self
            .records
            .get(page.as_str())
            .ok_or_else(|| CdsError::RecordMissing {
                page_path: page.as_str().to_string(),
                replica_id: Some(replica_id.0),
            })?;
        let slot = digests
            .get((replica_id.0 as usize).wrapping_sub(1))
            .ok_or_else(|| CdsError::RecordMissing {
                page_path: page.as_str().to_string(),
                replica_id: Some(replica_id.0),
            })?;
        Ok(aes128_decrypt_block(*slot, store_key))
    }

    /// All records, flattened in (page, replica) order.
    pub fn page_records(&self) -> Vec<PageRecord> {
        let mut out = Vec::new();
        for (page, digests) in &self.records {
            for (i, d) in digests.iter().enumerate() {
                out.push(PageRecord {
                    page_path: PagePath::from_provision(page).expect("normalized"),
                    replica_id: ReplicaId(i as u16 + 1),
                    cipher_digest: *d,
                });
            }
        }
        out
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(CdsError::StoreFormat("truncated store file".to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Provision everything from a golden content tree: the hash-store file, the
/// content-type manifest, and `replica_count` byte-identical replica content
/// directories under `data_dir`. Existing `replica-<n>` directories are
/// removed first — provisioning is always a full rebuild.
pub fn provision(
    golden_root: &Path,
    replica_count: u16,
    store_key: &AesKey128,
    store_path: &Path,
    data_dir: &Path,
) -> Result<StoreManifest> {
    if replica_count == 0 {
        return Err(CdsError::Validation(
            "replica_count must be >= 1".to_string(),
        ));
    }
    let mut files = Vec::new();
    walk_files(golden_root, golden_root, &mut files)?;
    files.sort();

    let mut records: BTreeMap<String, Vec<Digest128>> = BTreeMap::new();
    let mut types: BTreeMap<String, String> = BTreeMap::new();
    let mut contents: Vec<(PagePath, Vec<u8>)> = Vec::new();
    for rel in files {
        let rel_str = rel.to_str().ok_or_else(|| CdsError::BadPath {
            raw: rel.display().to_string(),
            reason: "file name is not valid UTF-8".to_string(),
        })?;
        let page = PagePath::from_provision(rel_str)?;
        let abs = golden_root.join(&rel);
        let bytes = fs::read(&abs)
            .map_err(|e| CdsError::io(format!("reading golden file {}", abs.display()), e))?;
        let digest = md5_digest(&bytes);
        let cipher = aes128_encrypt_block(digest, store_key);
        // identical content per replica, hence identical digests per slot
        let slots = vec![cipher; replica_count as usize];
        if records.insert(page.as_str().to_string(), slots).is_some() {
            return Err(CdsError::DuplicatePath(page.as_str().to_string()));
        }
        types.insert(
            page.as_str().to_string(),
            content_type_for(page.as_str()).to_string(),
        );
        contents.push((page, bytes));
    }

    fs::create_dir_all(data_dir)
        .map_err(|e| CdsError::io(format!("creating data dir {}", data_dir.display()), e))?;
    remove_existing_replica_dirs(data_dir)?;
    for id in 1..=replica_count {
        let root = data_dir.join(format!("replica-{id}"));
        fs::create_dir_all(&root)
            .map_err(|e| CdsError::io(format!("creating {}", root.display()), e))?;
        for (page, bytes) in &contents {
            let target = root.join(page.fs_rel());
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent)
                    .map_err(|e| CdsError::io(format!("creating {}", parent.display()), e))?;
            }
            fs::write(&target, bytes)
                .map_err(|e| CdsError::io(format!("writing {}", target.display()), e))?;
        }
    }

    let mut manifest_text = String::new();
    for (page, ctype) in &types {
        manifest_text.push_str(page);
        manifest_text.push('\t');
        manifest_text.push_str(ctype);
        manifest_text.push('\n');
    }
    let types_path = data_dir.join(TYPES_MANIFEST);
    fs::write(&types_path, manifest_text)
        .map_err(|e| CdsError::io(format!("writing {}", types_path.display()), e))?;

    let store = HashStore {
        manifest: StoreManifest {
            version: FORMAT_VERSION,
            replica_count,
            entry_count: records.len() as u32,
            key_fingerprint: md5_digest(store_key.key_bytes()),
        },
        records,
    };
    if let Some(parent) = store_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CdsError::io(format!("creating {}", parent.display()), e))?;
        }
    }
    store.save(store_path)?;
    Ok(store.manifest.clone())
}

fn walk_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries =
        fs::read_dir(dir).map_err(|e| CdsError::io(format!("listing {}", dir.display()), e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CdsError::io(format!("listing {}", dir.display()), e))?;
        let path = entry.path();
        let meta =
            fs::metadata(&path).map_err(|e| CdsError::io(format!("stat {}", path.display()), e))?;
        if meta.is_dir() {
            walk_files(root, &path, out)?;
        } else {
            let rel = path
                .strip_prefix(root)
                .expect("walked path is under root")
                .to_path_buf();
            out.push(rel);
        }
    }
    Ok(())
}

fn remove_existing_replica_dirs(data_dir: &Path) -> Result<()> {
    let entries = match fs::read_dir(data_dir) {
        Ok(e) => e,
        Err(_) => return Ok(()),
    };
    for entry in entries.flatten() {
        let name = entry.file_name();
        let name = name.to_string_lossy();
        let is_replica_dir = name
            .strip_prefix("replica-")
            .map(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            .unwrap_or(false);
        if is_replica_dir && entry.path().is_dir() {
            fs::remove_dir_all(entry.path()).map_err(|e| {
                CdsError::io(format!("removing stale {}", entry.path().display()), e)
            })?;
        }
    }
    Ok(())
}
