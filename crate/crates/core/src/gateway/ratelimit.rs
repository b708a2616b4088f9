use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::Clock;

/// Sliding-window limiter: at most `limit` dispatches in any half-open
/// window `[t, t + window)`.
#[derive(Debug)]
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    recent: Mutex<VecDeque<Duration>>,
    dispatched: Mutex<Vec<Duration>>,
}

impl RateLimiter {
    pub fn per_minute(limit: u32) -> Self {
        Self::new(limit, Duration::from_secs(60))
    }

    pub fn new(limit: u32, window: Duration) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        Self {
            limit: limit as usize,
            window,
            recent: Mutex::new(VecDeque::new()),
            dispatched: Mutex::new(Vec::new()),
        }
    }

    /// Blocks (through `clock`) until a slot is free, then claims it.
    /// Returns the dispatch time.
    pub fn acquire(&self, clock: &dyn Clock) -> Duration {
        loop {
            let wait = {
                let mut recent = self.recent.lock().unwrap();
                let now = clock.now();
                while recent.front().is_some_and(|&t| t + self.window <= now) {
                    recent.pop_front();
                }
                if recent.len() < self.limit {
                    recent.push_back(now);
                    self.dispatched.lock().unwrap().push(now);
                    return now;
                }
                // oldest entry leaves the window at oldest + window
                recent[0] + self.window - now
            };
            clock.sleep(wait);
        }
    }

    /// Dispatch times granted so far, in grant order.
    pub fn dispatch_log(&self) -> Vec<Duration> {
        self.dispatched.lock().unwrap().clone()
    }

    /// Largest number of dispatches falling in any window of this limiter's width.
    pub fn max_in_window(times: &[Duration], window: Duration) -> usize {
        let mut sorted = times.to_vec();
        sorted.sort();
        let mut best = 0;
        let mut lo = 0;
        for hi in 0..sorted.len() {
            while sorted[lo] + window <= sorted[hi] {
                lo += 1;
            }
            best = best.max(hi - lo + 1);
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::VirtualClock;

    #[test]
    fn burst_beyond_limit_waits_for_window() {
        let clock = VirtualClock::new();
        let limiter = RateLimiter::new(3, Duration::from_secs(60));
        let times: Vec<_> = (0..7).map(|_| limiter.acquire(&clock)).collect();
        let secs: Vec<u64> = times.iter().map(|t| t.as_secs()).collect();
        assert_eq!(secs, [0, 0, 0, 60, 60, 60, 120]);
        assert_eq!(RateLimiter::max_in_window(&times, Duration::from_secs(60)), 3);
    }

    #[test]
    fn spaced_requests_never_wait() {
        let clock = VirtualClock::new();
        let limiter = RateLimiter::new(2, Duration::from_secs(60));
        for _ in 0..5 {
            limiter.acquire(&clock);
            clock.advance(Duration::from_secs(30));
        }
        assert!(clock.sleeps().is_empty());
    }
}
