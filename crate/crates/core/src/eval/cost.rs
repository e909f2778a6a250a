//! Reasoner token usage and its price.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Self) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

/// Currency units per 1000 tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Price {
    #[serde(rename = "in", default)]
    pub input: f64,
    #[serde(rename = "out", default)]
    pub output: f64,
}

/// Prices by model name. A `default` entry covers unlisted models; without
/// one they are free.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceTable(pub BTreeMap<String, Price>);

impl PriceTable {
    pub fn price(&self, model: &str) -> Price {
        self.0
            .get(model)
            .or_else(|| self.0.get("default"))
            .copied()
            .unwrap_or_default()
    }

    pub fn cost(&self, model: &str, usage: &Usage) -> f64 {
        let p = self.price(model);
        (usage.prompt_tokens as f64 * p.input + usage.completion_tokens as f64 * p.output) / 1000.0
    }

    pub fn validate(&self) -> Result<(), String> {
        for (model, p) in &self.0 {
            if !(p.input >= 0.0 && p.output >= 0.0) {
                return Err(format!("price for `{model}` must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Prices every `payload.usage` in a JSONL trace, by `payload.model`.
pub fn cost_of_trace(path: &Path, prices: &PriceTable) -> std::io::Result<f64> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut total = 0.0;
    for (n, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("trace line {}: {e}", n + 1))
        })?;
        let Some(u) = event.pointer("/payload/usage") else {
            continue;
        };
        if let Ok(u) = serde_json::from_value::<Usage>(u.clone()) {
            let model = event.pointer("/payload/model").and_then(|m| m.as_str()).unwrap_or("");
            total += prices.cost(model, &u);
        }
    }
    Ok(total)
}
