//! Adapter for real applications exposed over an accessibility bus.
//!
//! The bus itself is abstract: a deployment registers an
//! [`AccessibilityBus`] implementation on the launcher. Without one the
//! backend reports every launch as failed to start.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use super::supervisor::Supervisor;
use super::{
    AccessibilityNode, Action, BackendError, BackendKind, Clock, DriverSession, GuiBackend,
};
use crate::raster::{Bounds, RasterImage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("application not registered on the bus")]
    NotRegistered,
    #[error("bus error: {0}")]
    Other(String),
}

/// Accessibility-bus operations for one process.
pub trait AccessibilityBus: Send + Sync {
    /// Root of the application owned by `pid`, once it has registered.
    fn root_for(&self, pid: u32) -> Result<Option<AccessibilityNode>, BusError>;
    /// Performs the action on the node with `node_id`.
    fn perform(&self, pid: u32, node_id: &str, action: &Action) -> Result<(), BusError>;
    /// Captures the screen region in window coordinates.
    fn capture(&self, pid: u32, region: Bounds) -> Result<RasterImage, BusError>;
}

const POLL_INTERVAL: Duration = Duration::from_millis(50);

struct BusBackend {
    process: Supervisor,
    bus: Arc<dyn AccessibilityBus>,
    log_cursor: usize,
}

impl BusBackend {
    fn bus_err(&mut self, e: BusError) -> BackendError {
        if self.process.poll().is_some() {
            BackendError::Dead
        } else {
            BackendError::Other(e.to_string())
        }
    }

    fn root(&mut self) -> Result<AccessibilityNode, BackendError> {
        match self.bus.root_for(self.process.pid()) {
            Ok(Some(root)) => Ok(root),
            Ok(None) => Err(self.bus_err(BusError::NotRegistered)),
            Err(e) => Err(self.bus_err(e)),
        }
    }
}

impl GuiBackend for BusBackend {
    fn snapshot(&mut self) -> Result<AccessibilityNode, BackendError> {
        self.root()
    }

    fn perform(&mut self, node: &AccessibilityNode, action: &Action) -> Result<(), BackendError> {
        let pid = self.process.pid();
        self.bus
            .perform(pid, &node.node_id, action)
            .map_err(|e| self.bus_err(e))
    }

    fn screenshot(&mut self) -> Result<RasterImage, BackendError> {
        let root = self.root()?;
        let pid = self.process.pid();
        self.bus.capture(pid, root.bounds).map_err(|e| self.bus_err(e))
    }

    fn is_alive(&mut self) -> bool {
        self.process.poll().is_none()
    }

    fn take_logs(&mut self) -> Vec<String> {
        let all = self.process.logs();
        let new = all[self.log_cursor.min(all.len())..].to_vec();
        self.log_cursor = all.len();
        new
    }

    fn shutdown(&mut self) {
        self.process.kill();
    }
}

pub(super) fn launch(
    bus: Option<Arc<dyn AccessibilityBus>>,
    clock: &dyn Clock,
    command: &[String],
    env: &BTreeMap<String, String>,
    cwd: Option<&Path>,
    timeout: Duration,
) -> DriverSession {
    let kind = BackendKind::AccessibilityBus;
    let Some(bus) = bus else {
        return DriverSession::failed(
            kind,
            vec!["error: accessibility bus backend is not enabled".into()],
            0.0,
        );
    };
    if timeout.is_zero() {
        return DriverSession::failed(kind, vec!["error: launch timeout must be positive".into()], 0.0);
    }
    let started = clock.now();
    let mut process = match Supervisor::spawn(command, env, cwd) {
        Ok(p) => p,
        Err(e) => {
            return DriverSession::failed(kind, vec![format!("error: cannot spawn {command:?}: {e}")], 0.0)
        }
    };
    let pid = process.pid();
    loop {
        let elapsed = clock.now() - started;
        if let Some(status) = process.poll() {
            process.kill();
            let mut logs = process.logs();
            logs.push(format!("error: process exited during startup ({status})"));
            return DriverSession::failed(kind, logs, elapsed.as_secs_f64());
        }
        if let Ok(Some(root)) = bus.root_for(pid) {
            if !root.is_empty() {
                let logs = process.logs();
                let log_cursor = logs.len();
                let backend = BusBackend {
                    process,
                    bus,
                    log_cursor,
                };
                return DriverSession::running(kind, Box::new(backend), logs, elapsed.as_secs_f64());
            }
        }
        if elapsed >= timeout {
            process.kill();
            let mut logs = process.logs();
            logs.push(format!(
                "error: no accessibility root within {:.3}s",
                timeout.as_secs_f64()
            ));
            return DriverSession::failed(kind, logs, elapsed.as_secs_f64());
        }
        clock.sleep(POLL_INTERVAL);
    }
}
