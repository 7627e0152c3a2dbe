//! The exclusivity gate: controller sessions (verification, scans) and
//! response transmission never overlap. The controller side takes the write
//! half, every transmitter takes the read half, so concurrent transmissions
//! are fine but no byte leaves the server while the controller is engaged.

use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use crate::clock::Clock;
use crate::traces::{SpanKind, SpanToken, TraceHandle};

#[derive(Clone)]
pub struct Gate {
    lock: Arc<RwLock<()>>,
    traces: TraceHandle,
    clock: Arc<dyn Clock>,
}

impl Gate {
    pub fn new(traces: TraceHandle, clock: Arc<dyn Clock>) -> Self {
        Gate {
            lock: Arc::new(RwLock::new(())),
            traces,
            clock,
        }
    }

    /// Hold for the duration of a controller session. Blocks until all
    /// in-flight transmissions finish; new transmissions queue behind it.
    pub fn exclusive(&self) -> ControllerSession<'_> {
        ControllerSession {
            _guard: self.lock.write().unwrap_or_else(|e| e.into_inner()),
        }
    }

    /// Hold while writing response bytes to a client.
    pub fn transmit(&self) -> TransmitGuard<'_> {
        let guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let token = self
            .traces
            .begin_span(SpanKind::Transmit, self.clock.now_ms());
        TransmitGuard {
            _guard: guard,
            token,
            gate: self,
        }
    }
}

pub struct ControllerSession<'a> {
    _guard: RwLockWriteGuard<'a, ()>,
}

pub struct TransmitGuard<'a> {
    _guard: RwLockReadGuard<'a, ()>,
    token: SpanToken,
    gate: &'a Gate,
}

impl Drop for TransmitGuard<'_> {
    fn drop(&mut self) {
        self.gate
            .traces
            .end_span(self.token, self.gate.clock.now_ms());
    }
}
