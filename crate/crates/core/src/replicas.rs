//! Replica content directories: N redundant copies of the golden tree that
//! actually serve traffic. Reads are always fresh from disk because
//! corruption can land between any two calls. Healing replaces a single file
//! from the golden copy; a reboot re-materializes the whole replica.
//!
//! Replica roots are plain directories (`<data_dir>/replica-<id>/...`),
//! deliberately world-inspectable so the harness can corrupt files from
//! outside the process.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CdsError, Result};
use crate::hashstore::{GoldenStore, PagePath};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ReplicaId(pub u16);

impl fmt::Display for ReplicaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug)]
pub struct ReplicaHandle {
    pub replica_id: ReplicaId,
    pub content_root: PathBuf,
    pub isolated: bool,
    /// Public requests served by this replica since the last reset.
    pub load_counter: u64,
}

pub struct ReplicaSet {
    handles: Vec<ReplicaHandle>,
}

impl ReplicaSet {
    /// Open `replica-1 .. replica-N` under `data_dir`, creating any missing
    /// roots (an empty store provisions no files, hence no directories).
    pub fn open(data_dir: &Path, replica_count: u16) -> Result<Self> {
        let mut handles = Vec::with_capacity(replica_count as usize);
        for id in 1..=replica_count {
            let root = data_dir.join(format!("replica-{id}"));
            fs::create_dir_all(&root)
                .map_err(|e| CdsError::io(format!("creating {}", root.display()), e))?;
            handles.push(ReplicaHandle {
                replica_id: ReplicaId(id),
                content_root: root,
                isolated: false,
                load_counter: 0,
            });
        }
        Ok(ReplicaSet { handles })
    }

    pub fn ids(&self) -> Vec<ReplicaId> {
        self.handles.iter().map(|h| h.replica_id).collect()
    }

    pub fn count(&self) -> u16 {
        self.handles.len() as u16
    }

    pub fn handle(&self, id: ReplicaId) -> Result<&ReplicaHandle> {
        self.handles
            .get((id.0 as usize).wrapping_sub(1))
            .ok_or_else(|| CdsError::Validation(format!("no replica {id}")))
    }

    fn handle_mut(&mut self, id: ReplicaId) -> Result<&mut ReplicaHandle> {
        self.handles
            .get_mut((id.0 as usize).wrapping_sub(1))
            .ok_or_else(|| CdsError::Validation(format!("no replica {id}")))
    }

    pub fn handles(&self) -> &[ReplicaHandle] {
        &self.handles
    }

    pub fn set_isolated(&mut self, id: ReplicaId, isolated: bool) -> Result<()> {
        self.handle_mut(id)?.isolated = isolated;
        Ok(())
    }

    pub fn increment_load(&mut self, id: ReplicaId) -> Result<()> {
        self.handle_mut(id)?.load_counter += 1;
        Ok(())
    }

    /// Test and operations hook: pin a load counter directly.
    pub fn set_load_counter(&mut self, id: ReplicaId, load: u64) -> Result<()> {
        self.handle_mut(id)?.load_counter = load;
        Ok(())
    }

    /// Current on-disk bytes of the replica's copy. No caching — every call
    /// re-reads, because corruption may occur between calls. Absent or
    /// unreadable files surface as `PageMissing`.
    pub fn read_page(&self, id: ReplicaId, page: &PagePath) -> Result<Vec<u8>> {
        let handle = self.handle(id)?;
        let path = handle.content_root.join(page.fs_rel());
        fs::read(&path).map_err(|_| CdsError::PageMissing {
            replica_id: id.0,
            page_path: page.as_str().to_string(),
        })
    }

    /// Replace one replica file with its golden copy. Returns true when the
    /// bytes changed, false when the copy was already identical. A heal is a
    /// plain file write; filesystem states it cannot fix (for example a
    /// directory squatting on the file's path) surface as `HealFailed` and
    /// are left for a reboot's full scrub.
    pub fn heal_page(
        &mut self,
        id: ReplicaId,
        page: &PagePath,
        golden: &GoldenStore,
    ) -> Result<bool> {
        let (golden_bytes, _) = golden.bytes(page)?;
        let handle = self.handle(id)?;
        let path = handle.content_root.join(page.fs_rel());
        if let Ok(current) = fs::read(&path) {
            if current == golden_bytes {
                return Ok(false);
            }
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CdsError::HealFailed {
                replica_id: id.0,
                page_path: page.as_str().to_string(),
                reason: e.to_string(),
            })?;
        }
        fs::write(&path, &golden_bytes).map_err(|e| CdsError::HealFailed {
            replica_id: id.0,
            page_path: page.as_str().to_string(),
            reason: e.to_string(),
        })?;
        Ok(true)
    }

    /// Full re-materialization: scrub the content root and rewrite every
    /// golden page, then clear the isolation flag and the load counter.
    /// Trust-state reset is the controller's side of the contract.
    pub fn reboot_replica(&mut self, id: ReplicaId, golden: &GoldenStore) -> Result<()> {
        let root = self.handle(id)?.content_root.clone();
        let fail = |reason: String| CdsError::RebootFailed {
            replica_id: id.0,
            reason,
        };
        if root.exists() {
            fs::remove_dir_all(&root).map_err(|e| fail(format!("scrub: {e}")))?;
        }
        fs::create_dir_all(&root).map_err(|e| fail(format!("recreate root: {e}")))?;
        for page in golden.pages() {
            let (bytes, _) = golden.bytes(&page)?;
            let target = root.join(page.fs_rel());
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(|e| fail(format!("mkdir: {e}")))?;
            }
            fs::write(&target, &bytes)
                .map_err(|e| fail(format!("write {}: {e}", page.as_str())))?;
        }
        let handle = self.handle_mut(id)?;
        handle.isolated = false;
        handle.load_counter = 0;
        Ok(())
    }

    #[cfg(test)]
    fn from_handles(handles: Vec<ReplicaHandle>) -> Self {
        ReplicaSet { handles }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::AesKey128;
    use crate::hashstore::{provision, TYPES_MANIFEST};

    fn fixture(
        files: &[(&str, &[u8])],
        replicas: u16,
    ) -> (tempfile::TempDir, GoldenStore, ReplicaSet) {
        let dir = tempfile::tempdir().unwrap();
        let golden_root = dir.path().join("golden");
        fs::create_dir_all(&golden_root).unwrap();
        for (rel, bytes) in files {
            let p = golden_root.join(rel);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent).unwrap();
            }
            fs::write(p, bytes).unwrap();
        }
        let data = dir.path().join("data");
        provision(
            &golden_root,
            replicas,
            &AesKey128::new([1; 16]),
            &dir.path().join("store.cdsh"),
            &data,
        )
        .unwrap();
        let golden = GoldenStore::load(&golden_root, &data.join(TYPES_MANIFEST)).unwrap();
        let set = ReplicaSet::open(&data, replicas).unwrap();
        (dir, golden, set)
    }

    #[test]
    fn read_page_is_honest_about_disk_state() {
        let (dir, _, set) = fixture(&[("index.html", b"hello")], 2);
        let page = PagePath::from_provision("index.html").unwrap();
        assert_eq!(set.read_page(ReplicaId(1), &page).unwrap(), b"hello");

        // corrupt behind the set's back; the next read must see it
        let copy = dir.path().join("data/replica-1/index.html");
        fs::write(&copy, b"evil!").unwrap();
        assert_eq!(set.read_page(ReplicaId(1), &page).unwrap(), b"evil!");

        fs::remove_file(&copy).unwrap();
        assert!(matches!(
            set.read_page(ReplicaId(1), &page),
            Err(CdsError::PageMissing { .. })
        ));
    }

    #[test]
    fn heal_restores_and_is_idempotent() {
        let (dir, golden, mut set) = fixture(&[("index.html", b"hello")], 2);
        let page = PagePath::from_provision("index.html").unwrap();
        let copy = dir.path().join("data/replica-1/index.html");

        fs::write(&copy, b"tampered").unwrap();
        assert!(set.heal_page(ReplicaId(1), &page, &golden).unwrap());
        assert_eq!(fs::read(&copy).unwrap(), b"hello");

        // already clean: no change
        assert!(!set.heal_page(ReplicaId(1), &page, &golden).unwrap());

        // deleted file is recreated
        fs::remove_file(&copy).unwrap();
        assert!(set.heal_page(ReplicaId(1), &page, &golden).unwrap());
        assert_eq!(fs::read(&copy).unwrap(), b"hello");
    }

    #[test]
    fn heal_fails_on_directory_squat() {
        let (dir, golden, mut set) = fixture(&[("index.html", b"hello")], 1);
        let page = PagePath::from_provision("index.html").unwrap();
        let copy = dir.path().join("data/replica-1/index.html");
        fs::remove_file(&copy).unwrap();
        fs::create_dir(&copy).unwrap();
        assert!(matches!(
            set.heal_page(ReplicaId(1), &page, &golden),
            Err(CdsError::HealFailed { .. })
        ));
        // reboot's scrub clears exactly this kind of wreckage
        set.reboot_replica(ReplicaId(1), &golden).unwrap();
        assert_eq!(fs::read(&copy).unwrap(), b"hello");
    }

    #[test]
    fn reboot_rematerializes_everything_and_resets_counters() {
        let files: [(&str, &[u8]); 3] = [
            ("a.html", b"aaa"),
            ("b.html", b"bbb"),
            ("docs/c.html", b"ccc"),
        ];
        let (dir, golden, mut set) = fixture(&files, 2);
        let root = dir.path().join("data/replica-2");
        fs::write(root.join("a.html"), b"x").unwrap();
        fs::write(root.join("b.html"), b"y").unwrap();
        fs::write(root.join("docs/c.html"), b"z").unwrap();
        fs::write(root.join("planted.sh"), b"#!/bin/sh").unwrap();
        set.set_isolated(ReplicaId(2), true).unwrap();
        set.increment_load(ReplicaId(2)).unwrap();

        set.reboot_replica(ReplicaId(2), &golden).unwrap();
        for (rel, bytes) in &files {
            assert_eq!(fs::read(root.join(rel)).unwrap(), *bytes);
        }
        assert!(!root.join("planted.sh").exists(), "scrub removes strays");
        let h = set.handle(ReplicaId(2)).unwrap();
        assert!(!h.isolated);
        assert_eq!(h.load_counter, 0);
    }

    #[test]
    fn reboot_of_clean_replica_changes_nothing() {
        let (dir, golden, mut set) = fixture(&[("a.html", b"aaa")], 1);
        set.reboot_replica(ReplicaId(1), &golden).unwrap();
        assert_eq!(
            fs::read(dir.path().join("data/replica-1/a.html")).unwrap(),
            b"aaa"
        );
    }

    #[test]
    fn reboot_failure_surfaces() {
        let dir = tempfile::tempdir().unwrap();
        // content root parent is a file, so the root can never be recreated
        let blocker = dir.path().join("data");
        fs::write(&blocker, b"not a dir").unwrap();
        let golden_root = dir.path().join("golden");
        fs::create_dir_all(&golden_root).unwrap();
        let golden = GoldenStore::from_entries(&golden_root, Default::default());
        let mut set = ReplicaSet::from_handles(vec![ReplicaHandle {
            replica_id: ReplicaId(1),
            content_root: blocker.join("replica-1"),
            isolated: false,
            load_counter: 0,
        }]);
        assert!(matches!(
            set.reboot_replica(ReplicaId(1), &golden),
            Err(CdsError::RebootFailed { .. })
        ));
    }
}
