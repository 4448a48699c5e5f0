//! Sliding-window rate limiter and the clocks it runs on.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;
    fn sleep_until(&self, deadline: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, deadline: Duration) {
        let now = self.now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        }
    }
}

/// Virtual clock: sleeping jumps time forward instead of blocking.
#[derive(Default)]
pub struct MockClock {
    now: Mutex<Duration>,
}

impl MockClock {
    pub fn new() -> Self {
        MockClock::default()
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        *self.now.lock().expect("clock lock")
    }

    fn sleep_until(&self, deadline: Duration) {
        let mut now = self.now.lock().expect("clock lock");
        if deadline > *now {
            *now = deadline;
        }
    }
}

/// At most `limit` sends in any half-open window of length `window`.
///
/// Callers reserve a send slot under the lock, then sleep until it outside the
/// lock. Slots are non-decreasing and slot `i + limit` is never earlier than
/// slot `i + window`.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    state: Mutex<LimiterState>,
}

#[derive(Default)]
struct LimiterState {
    recent: VecDeque<Duration>,
    granted: Vec<Duration>,
}

impl RateLimiter {
    pub fn per_minute(limit: u32) -> Self {
        RateLimiter::new(limit, Duration::from_secs(60))
    }

    pub fn new(limit: u32, window: Duration) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        RateLimiter {
            limit: limit as usize,
            window,
            state: Mutex::new(LimiterState::default()),
        }
    }

    /// Blocks (on `clock`) until a send is allowed; returns the granted slot.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        let slot = {
            let mut state = self.state.lock().expect("limiter lock");
            let mut slot = clock.now();
            if let Some(&last) = state.recent.back() {
                slot = slot.max(last);
            }
            if state.recent.len() >= self.limit {
                let oldest = state.recent[state.recent.len() - self.limit];
                slot = slot.max(oldest + self.window);
            }
            state.recent.push_back(slot);
            while state.recent.len() > self.limit {
                state.recent.pop_front();
            }
            state.granted.push(slot);
            slot
        };
        clock.sleep_until(slot);
        slot
    }

    /// Every slot granted so far, in grant order.
    pub fn granted(&self) -> Vec<Duration> {
        self.state.lock().expect("limiter lock").granted.clone()
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn window(&self) -> Duration {
        self.window
    }
}

/// Largest number of timestamps falling in any half-open window `[t, t + window)`.
pub fn max_in_window(times: &[Duration], window: Duration) -> usize {
    let mut sorted = times.to_vec();
    sorted.sort();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] >= sorted[lo] + window {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{ChatClient, BackendConfig, MockBackend};
    use std::sync::Arc;

    #[test]
    fn window_counting() {
        let s = |v: &[u64]| v.iter().map(|&x| Duration::from_secs(x)).collect::<Vec<_>>();
        assert_eq!(max_in_window(&s(&[0, 0, 59, 60, 61]), Duration::from_secs(60)), 3);
        assert_eq!(max_in_window(&s(&[0, 60, 120]), Duration::from_secs(60)), 1);
        assert_eq!(max_in_window(&[], Duration::from_secs(60)), 0);
    }

    #[test]
    fn sequential_burst_respects_limit() {
        let clock = MockClock::new();
        let limiter = RateLimiter::per_minute(5);
        for _ in 0..15 {
            limiter.acquire(&clock);
        }
        let granted = limiter.granted();
        assert_eq!(max_in_window(&granted, Duration::from_secs(60)), 5);
        assert_eq!(*granted.last().unwrap(), Duration::from_secs(120));
    }

    #[test]
    fn concurrent_burst_never_exceeds_rate() {
        let rate = 7u32;
        let clock = Arc::new(MockClock::new());
        let backend = Arc::new(MockBackend::scripted(vec![Ok("ok".into())]));
        let config = BackendConfig { rate_limit_per_minute: rate, ..BackendConfig::default() };
        let client = Arc::new(ChatClient::with_clock(backend.clone(), config, clock.clone()).unwrap());
        std::thread::scope(|scope| {
            for i in 0..(3 * rate) {
                let client = client.clone();
                scope.spawn(move || {
                    let req = crate::transport::tests::request(&format!("burst {i}"));
                    client.chat(&req).unwrap();
                });
            }
        });
        assert_eq!(backend.call_count(), 3 * rate as usize);
        let granted = client.limiter().granted();
        assert_eq!(granted.len(), 3 * rate as usize);
        assert!(max_in_window(&granted, Duration::from_secs(60)) <= rate as usize);
        assert!(clock.now() >= Duration::from_secs(120));
    }
}
