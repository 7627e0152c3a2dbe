//! The golden store: the controller-side pristine copy of every page, the
//! source for healing and the provenance of every stored digest. It is a
//! plain directory tree plus a tab-separated manifest mapping page path to
//! content type. Golden content lives outside every replica root.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::path::PagePath;
use crate::error::{CdsError, Result};

pub const TYPES_MANIFEST: &str = "content-types.tsv";

pub struct GoldenStore {
    root: PathBuf,
    // page path -> content type; keys double as the page inventory
    types: BTreeMap<String, String>,
}

impl GoldenStore {
    /// Load the golden tree rooted at `root` with the content-type manifest
    /// written at provisioning time (normally `<data>/content-types.tsv`).
    pub fn load(root: &Path, types_manifest: &Path) -> Result<Self> {
        let text = fs::read_to_string(types_manifest).map_err(|e| {
            CdsError::io(
                format!("reading content-type manifest {}", types_manifest.display()),
                e,
            )
        })?;
        let mut types = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (page, ctype) = line.split_once('\t').ok_or_else(|| {
                CdsError::StoreFormat(format!(
                    "content-type manifest line {} is not `page<TAB>type`",
                    lineno + 1
                ))
            })?;
            types.insert(page.to_string(), ctype.to_string());
        }
        Ok(GoldenStore {
            root: root.to_path_buf(),
            types,
        })
    }

    pub fn from_entries(root: &Path, types: BTreeMap<String, String>) -> Self {
        GoldenStore {
            root: root.to_path_buf(),
            types,
        }
    }

    pub fn contains(&self, page: &PagePath) -> bool {
        self.types.contains_key(page.as_str())
    }

    pub fn pages(&self) -> impl Iterator<Item = PagePath> + '_ {
        // keys were normalized at provisioning; unwrap is safe
        self.types
            .keys()
            .map(|k| PagePath::from_provision(k).expect("stored page path is normalized"))
    }

    pub fn page_count(&self) -> usize {
        self.types.len()
    }

    /// The golden copy exactly as provisioned, with its content type.
    pub fn bytes(&self, page: &PagePath) -> Result<(Vec<u8>, String)> {
        let ctype = self
            .types
            .get(page.as_str())
            .ok_or_else(|| CdsError::RecordMissing {
                page_path: page.as_str().to_string(),
                replica_id: None,
            })?;
        let path = self.root.join(page.fs_rel());
        let bytes = fs::read(&path)
            .map_err(|e| CdsError::io(format!("reading golden copy {}", path.display()), e))?;
        Ok((bytes, ctype.clone()))
    }

    pub fn content_type(&self, page: &PagePath) -> Option<&str> {
        self.types.get(page.as_str()).map(|s| s.as_str())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Media type from the file extension; unknown extensions fall back to
/// application/octet-stream.
pub fn content_type_for(page: &str) -> &'static str {
    let ext = page.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    match ext.to_ascii_lowercase().as_str() {
        "html" | "htm" => "text/html",
        "css" => "text/css",
        "js" => "application/javascript",
        "json" => "application/json",
        "txt" => "text/plain",
        "xml" => "application/xml",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "ico" => "image/x-icon",
        "pdf" => "application/pdf",
        "csv" => "text/csv",
        _ => "application/octet-stream",
    }
}
