use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One trace line. `ts` is a logical clock: the event's position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub ts: u64,
    pub actor: String,
    pub event: String,
    pub payload: Value,
}

/// Append-only event log of one debugging loop.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DebugTrace {
    events: Vec<TraceEvent>,
}

impl DebugTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, actor: &str, event: &str, payload: Value) {
        let ts = self.events.len() as u64;
        self.events.push(TraceEvent {
            ts,
            actor: actor.into(),
            event: event.into(),
            payload,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn of<'a>(&'a self, actor: &'a str, event: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.actor == actor && e.event == event)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace event serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())
    }

    pub fn parse(jsonl: &str) -> Result<Self, serde_json::Error> {
        let events = jsonl
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<TraceEvent>, _>>()?;
        Ok(Self { events })
    }
}
