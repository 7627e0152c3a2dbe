//! Controller configuration: alarm thresholds, the corruption threshold and
//! alert weights behind the trust state machine, failure-rate window size,
//! and scan scheduling. Loaded from a `key=value` text file; every value is
//! echoed in the startup banner so a deployment is auditable from its log.

use std::collections::BTreeMap;

use crate::error::{CdsError, Result};

pub mod alert_kinds {
    pub const HASH_MISMATCH: &str = "hash-mismatch";
    pub const PAGE_MISSING: &str = "page-missing";
    pub const HEAL_FAILED: &str = "heal-failed";
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    /// Failure rates below this stay log-only.
    pub th_low: f64,
    /// Failure rates above this raise the higher beep.
    pub th_high: f64,
    /// Corruption threshold: an alert level above this marks the replica corrupted.
    pub tc: u32,
    pub alert_weights: BTreeMap<String, u32>,
    /// Verified requests per failure-rate window.
    pub window: u32,
    /// Zero-traffic span that triggers a scan.
    pub crp_idle_trigger_ms: u64,
    /// Upper bound between scans regardless of traffic.
    pub crp_period_max_ms: u64,
    /// Expected replica count; `None` defers to the store manifest.
    pub replicas: Option<u16>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(alert_kinds::HASH_MISMATCH.to_string(), 3);
        weights.insert(alert_kinds::PAGE_MISSING.to_string(), 5);
        weights.insert(alert_kinds::HEAL_FAILED.to_string(), 5);
        ControllerConfig {
            th_low: 0.05,
            th_high: 0.20,
            tc: 10,
            alert_weights: weights,
            window: 100,
            crp_idle_trigger_ms: 5_000,
            crp_period_max_ms: 60_000,
            replicas: None,
        }
    }
}

impl ControllerConfig {
    /// Parse `key=value` lines; `#` starts a comment. Unset keys keep their
    /// defaults, unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = ControllerConfig::default();
        let mut weights_touched = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CdsError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                CdsError::Config(format!("line {}: bad {what} value {value:?}", lineno + 1))
            };
            match key {
                "th_low" => config.th_low = value.parse().map_err(|_| bad("th_low"))?,
                "th_high" => config.th_high = value.parse().map_err(|_| bad("th_high"))?,
                "tc" => config.tc = value.parse().map_err(|_| bad("tc"))?,
                "window" => config.window = value.parse().map_err(|_| bad("window"))?,
                "crp_idle_trigger_ms" => {
                    config.crp_idle_trigger_ms =
                        value.parse().map_err(|_| bad("crp_idle_trigger_ms"))?
                }
                "crp_period_max_ms" => {
                    config.crp_period_max_ms =
                        value.parse().map_err(|_| bad("crp_period_max_ms"))?
                }
                "replicas" => config.replicas = Some(value.parse().map_err(|_| bad("replicas"))?),
                _ => {
                    if let Some(kind) = key.strip_prefix("weights.") {
                        if !weights_touched {
                            // an explicit weight table replaces the default one
                            config.alert_weights.clear();
                            weights_touched = true;
                        }
                        let w: u32 = value.parse().map_err(|_| bad("weight"))?;
                        config.alert_weights.insert(kind.to_string(), w);
                    } else {
                        return Err(CdsError::Config(format!(
                            "line {}: unknown key {key:?}",
                            lineno + 1
                        )));
                    }
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.th_low)
            || !(0.0..=1.0).contains(&self.th_high)
            || self.th_low >= self.th_high
        {
            return Err(CdsError::Config(format!(
                "thresholds must satisfy 0 <= th_low < th_high <= 1, got {} and {}",
                self.th_low, self.th_high
            )));
        }
        if self.alert_weights.is_empty() {
            return Err(CdsError::Config("no alert weights configured".to_string()));
        }
        let mut max_weight = 0;
        for (kind, &w) in &self.alert_weights {
            if w == 0 {
                return Err(CdsError::Config(format!("weight for {kind:?} must be > 0")));
            }
            max_weight = max_weight.max(w);
        }
        // a single alert must never jump a replica straight past suspected
        if self.tc <= max_weight {
            return Err(CdsError::Config(format!(
                "tc ({}) must exceed the largest alert weight ({max_weight})",
                self.tc
            )));
        }
        if self.window == 0 {
            return Err(CdsError::Config("window must be positive".to_string()));
        }
        if self.crp_idle_trigger_ms == 0 || self.crp_period_max_ms == 0 {
            return Err(CdsError::Config(
                "scan intervals must be positive".to_string(),
            ));
        }
        if self.replicas == Some(0) {
            return Err(CdsError::Config("replicas must be >= 1".to_string()));
        }
        Ok(())
    }

    pub fn weight(&self, kind: &str) -> Result<u32> {
        self.alert_weights
            .get(kind)
            .copied()
            .ok_or_else(|| CdsError::UnknownAlertKind(kind.to_string()))
    }

    /// One line per setting, printed at startup.
    pub fn banner_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("th_low={}", self.th_low),
            format!("th_high={}", self.th_high),
            format!("tc={}", self.tc),
            format!("window={}", self.window),
            format!("crp_idle_trigger_ms={}", self.crp_idle_trigger_ms),
            format!("crp_period_max_ms={}", self.crp_period_max_ms),
            format!(
                "replicas={}",
                self.replicas
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "(from store)".to_string())
            ),
        ];
        for (kind, w) in &self.alert_weights {
            lines.push(format!("weights.{kind}={w}"));
        }
        lines
    }
}
