use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};

/// Counting gate bounding in-flight requests to one endpoint.
#[derive(Debug)]
pub struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    pub fn new(limit: usize) -> Self {
        Gate {
            limit: limit.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn in_flight(&self) -> usize {
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Blocks until a slot is free.
    pub fn acquire(&self) -> GatePermit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        GatePermit { gate: self }
    }
}

pub struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.gate.freed.notify_one();
    }
}

/// Hands out one shared [`Gate`] per endpoint.
#[derive(Debug, Default)]
pub struct GateRegistry {
    gates: Mutex<HashMap<String, Arc<Gate>>>,
}

impl GateRegistry {
    pub fn gate(&self, key: &str, limit: usize) -> Arc<Gate> {
        let mut gates = self.gates.lock().unwrap_or_else(|e| e.into_inner());
        gates.entry(key.to_string()).or_insert_with(|| Arc::new(Gate::new(limit))).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn never_exceeds_limit() {
        let gate = Arc::new(Gate::new(2));
        let peak = Arc::new(AtomicUsize::new(0));
        std::thread::scope(|s| {
            for _ in 0..8 {
                let gate = gate.clone();
                let peak = peak.clone();
                s.spawn(move || {
                    let _permit = gate.acquire();
                    peak.fetch_max(gate.in_flight(), Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
        assert_eq!(gate.in_flight(), 0);
    }

    #[test]
    fn registry_shares_gates() {
        let reg = GateRegistry::default();
        let a = reg.gate("x", 4);
        let b = reg.gate("x", 9);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(b.limit(), 4);
    }
}
