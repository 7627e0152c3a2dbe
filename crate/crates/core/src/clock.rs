//! Injectable time source. The controller's scheduling (idle-triggered and
//! periodic scans) reads time only through [`Clock`], so the harness can drive
//! it from a virtual clock without real waiting.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    /// Milliseconds since the clock's epoch (UNIX epoch for wall clocks,
    /// zero for virtual clocks).
    fn now_ms(&self) -> u64;
}

/// Real time, UNIX epoch milliseconds.
pub struct WallClock;

impl Clock for WallClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Manually advanced clock. Never moves backwards.
pub struct VirtualClock {
    now: AtomicU64,
}

impl VirtualClock {
    pub fn new(start_ms: u64) -> Self {
        VirtualClock {
            now: AtomicU64::new(start_ms),
        }
    }

    pub fn advance_ms(&self, delta: u64) -> u64 {
        self.now.fetch_add(delta, Ordering::SeqCst) + delta
    }

    /// Move to an absolute time; earlier targets are ignored.
    pub fn advance_to(&self, target_ms: u64) {
        self.now.fetch_max(target_ms, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> u64 {
        self.now.load(Ordering::SeqCst)
    }
}

/// Virtual clock driven by a pre-written script of `advance <ms>` lines.
/// Each [`ScriptedClock::step`] applies the next line; once the script is
/// exhausted the clock stands still.
pub struct ScriptedClock {
    inner: VirtualClock,
    steps: Mutex<VecDeque<u64>>,
}

impl ScriptedClock {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut steps = VecDeque::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("advance"), Some(ms), None) => {
                    let ms: u64 = ms
                        .parse()
                        .map_err(|_| format!("clock script line {}: bad ms", lineno + 1))?;
                    steps.push_back(ms);
                }
                _ => {
                    return Err(format!(
                        "clock script line {}: expected `advance <ms>`",
                        lineno + 1
                    ))
                }
            }
        }
        Ok(ScriptedClock {
            inner: VirtualClock::new(0),
            steps: Mutex::new(steps),
        })
    }

    /// Apply the next scripted advance. Returns false when exhausted.
    pub fn step(&self) -> bool {
        let mut steps = self.steps.lock().unwrap();
        match steps.pop_front() {
            Some(ms) => {
                self.inner.advance_ms(ms);
                true
            }
            None => false,
        }
    }
}

impl Clock for ScriptedClock {
    fn now_ms(&self) -> u64 {
        self.inner.now_ms()
    }
}
