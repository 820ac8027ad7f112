use serde::{Deserialize, Serialize};

/// Exponentially weighted packet-loss estimate driven by sequence gaps.
///
/// A gap of `k` missing sequence numbers is a burst of length `k`. The ratio
/// is taken over the heartbeats expected since the previous update; the window
/// restarts after every update. A window that fills up without a burst is
/// folded in as a zero-length burst so old disruptions are forgotten.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketLossState {
    pub alpha: f64,
    pub p_prev: f64,
    pub last_seq: u64,
    pub window_len: u64,
}

impl PacketLossState {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, p_prev: 0.0, last_seq: 0, window_len: 0 }
    }

    pub fn estimate(&self) -> f64 {
        self.p_prev
    }

    /// Applies `p ← α·burst/window + (1−α)·p`.
    pub fn update(&mut self, burst: u64, window: u64) -> f64 {
        let ratio = if window == 0 { 0.0 } else { (burst as f64 / window as f64).min(1.0) };
        self.p_prev = (self.alpha * ratio + (1.0 - self.alpha) * self.p_prev).clamp(0.0, 1.0);
        self.p_prev
    }

    /// Accounts for a newly received sequence number. `window_cap` bounds the
    /// loss-free stretch before a zero-burst update.
    pub(crate) fn observe(&mut self, seq: u64, window_cap: u64) {
        let advance = seq.saturating_sub(self.last_seq);
        self.last_seq = seq;
        self.window_len = self.window_len.saturating_add(advance);
        let burst = advance.saturating_sub(1);
        if burst > 0 {
            self.update(burst, self.window_len);
            self.window_len = 0;
        } else if self.window_len >= window_cap.max(1) {
            self.update(0, self.window_len);
            self.window_len = 0;
        }
    }
}
