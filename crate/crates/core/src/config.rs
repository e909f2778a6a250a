//! Batch-run configuration, loaded from TOML. Command-line flags override
//! individual fields.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::eval::PriceTable;
use crate::layout::PenaltyWeights;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seconds an application has to expose its accessibility root.
    pub fs_timeout_s: f64,
    pub layout_gate: Option<f64>,
    pub penalty_weights: PenaltyWeights,
    pub price_table: PriceTable,
    pub planner_max: usize,
    pub operator_max: usize,
    pub history_window: usize,
    pub workers: usize,
    /// Command line of an external scorer speaking the sidecar protocol.
    pub sidecar: Option<Vec<String>>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            fs_timeout_s: 10.0,
            layout_gate: None,
            penalty_weights: PenaltyWeights::default(),
            price_table: PriceTable::default(),
            planner_max: 10,
            operator_max: 5,
            history_window: 4,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            sidecar: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Config = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// `path` if given, otherwise defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.fs_timeout_s.is_finite() && self.fs_timeout_s > 0.0) {
            return bad(format!("fs_timeout_s must be positive, got {}", self.fs_timeout_s));
        }
        if let Some(g) = self.layout_gate {
            if !(0.0..=1.0).contains(&g) {
                return bad(format!("layout_gate must lie in [0, 1], got {g}"));
            }
        }
        for (name, n) in [
            ("planner_max", self.planner_max),
            ("operator_max", self.operator_max),
            ("history_window", self.history_window),
            ("workers", self.workers),
        ] {
            if n == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        let w = &self.penalty_weights;
        if [w.deletion, w.shift, w.collapse, w.style]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return bad("penalty weights must be non-negative".into());
        }
        self.price_table.validate().map_err(ConfigError::Invalid)?;
        if matches!(&self.sidecar, Some(cmd) if cmd.is_empty()) {
            return bad("sidecar command is empty".into());
        }
        Ok(())
    }

    pub fn fs_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.fs_timeout_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_partial_files() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.planner_max, 10);
        assert_eq!(c.operator_max, 5);
        assert_eq!(c.history_window, 4);
        assert_eq!(c.fs_timeout(), Duration::from_secs(10));
        let c = Config::parse(
            r#"
layout_gate = 0.5
workers = 2
[penalty_weights]
style = 0.2
[price_table.default]
in = 0.01
out = 0.03
"#,
        )
        .unwrap();
        assert_eq!(c.layout_gate, Some(0.5));
        assert_eq!(c.penalty_weights.style, 0.2);
        assert_eq!(c.penalty_weights.deletion, PenaltyWeights::default().deletion);
        assert_eq!(c.price_table.price("any").output, 0.03);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "workers = 0",
            "planner_max = 0",
            "fs_timeout_s = -1.0",
            "layout_gate = 1.5",
            "[price_table.m]\nin = -1.0",
            "[penalty_weights]\nshift = -0.1",
            "sidecar = []",
            "mystery = 1",
        ] {
            assert!(Config::parse(bad).is_err(), "{bad}");
        }
    }
}
