use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Shared dispatch gate enforcing a minimum interval between consecutive
/// requests.
///
/// The gate lock is held while waiting, so dispatches are serialised even
/// when many workers share one gate. Responses may still complete out of
/// order. Every dispatch instant is appended to a log so the spacing can
/// be checked after the fact.
#[derive(Debug)]
pub struct RateGate {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
    log: Mutex<Vec<Instant>>,
}

impl RateGate {
    pub fn new(min_interval: Duration) -> Self {
        Self {
            min_interval,
            last: Mutex::new(None),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn min_interval(&self) -> Duration {
        self.min_interval
    }

    /// Blocks until a request may be dispatched and records the dispatch.
    pub fn acquire(&self) -> Instant {
        let mut last = self.last.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let ready = prev + self.min_interval;
            let now = Instant::now();
            if ready > now {
                std::thread::sleep(ready - now);
            }
        }
        let now = Instant::now();
        *last = Some(now);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(now);
        now
    }

    /// Dispatch instants in issue order.
    pub fn request_log(&self) -> Vec<Instant> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn consecutive_dispatches_are_spaced() {
        let gate = Arc::new(RateGate::new(Duration::from_millis(15)));
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let g = Arc::clone(&gate);
                std::thread::spawn(move || {
                    for _ in 0..3 {
                        g.acquire();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        let log = gate.request_log();
        assert_eq!(log.len(), 12);
        for w in log.windows(2) {
            assert!(w[1].duration_since(w[0]) >= Duration::from_millis(15));
        }
    }

    #[test]
    fn zero_interval_never_blocks() {
        let gate = RateGate::new(Duration::ZERO);
        let start = Instant::now();
        for _ in 0..100 {
            gate.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(500));
    }
}
