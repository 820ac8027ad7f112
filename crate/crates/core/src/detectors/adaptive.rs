use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{check_order, DetectorConfig, DetectorError, DetectorKind, FailureDetector, HeartbeatSample};

/// Stored inter-arrival times of the adaptive detector. Grows with occupancy
/// up to `omega_max` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveDetectorState {
    pub window: VecDeque<u64>,
    pub omega_max: u64,
    pub heartbeats: u64,
    pub last_timestamp: u64,
    pub last_seq: u64,
}

/// Suspicion is the empirical CDF of the stored intervals evaluated at the
/// time elapsed since the last heartbeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveDetector {
    pub config: DetectorConfig,
    pub state: AdaptiveDetectorState,
}

impl AdaptiveDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, DetectorError> {
        config.validate()?;
        Ok(Self {
            config,
            state: AdaptiveDetectorState {
                window: VecDeque::new(),
                omega_max: config.omega_max,
                heartbeats: 0,
                last_timestamp: 0,
                last_seq: 0,
            },
        })
    }

    pub fn window(&self) -> &VecDeque<u64> {
        &self.state.window
    }

    fn elapsed_for_count(sorted: &[u64], threshold: f64) -> Option<f64> {
        let len = sorted.len();
        if threshold <= 0.0 {
            return Some(0.0);
        }
        // smallest k with k/len >= threshold
        let mut k = ((threshold * len as f64).ceil() as usize).min(len + 1);
        while k > 0 && (k - 1) as f64 / len as f64 >= threshold {
            k -= 1;
        }
        while k <= len && (k as f64 / len as f64) < threshold {
            k += 1;
        }
        (k >= 1 && k <= len).then(|| sorted[k - 1] as f64)
    }
}

impl FailureDetector for AdaptiveDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Adaptive
    }

    fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn record_heartbeat(&mut self, hb: &HeartbeatSample) -> Result<(), DetectorError> {
        let s = &mut self.state;
        let last = (s.heartbeats > 0).then_some((s.last_timestamp, s.last_seq));
        check_order(last, hb)?;
        if s.heartbeats > 0 {
            s.window.push_back(hb.timestamp - s.last_timestamp);
            while s.window.len() as u64 > s.omega_max {
                s.window.pop_front();
            }
        }
        s.last_timestamp = hb.timestamp;
        s.last_seq = hb.seq;
        s.heartbeats += 1;
        Ok(())
    }

    fn last_heartbeat_at(&self) -> Option<u64> {
        (self.state.heartbeats > 0).then_some(self.state.last_timestamp)
    }

    fn suspicion(&self, now: f64) -> Result<f64, DetectorError> {
        let window = &self.state.window;
        if window.is_empty() {
            return Err(DetectorError::Unavailable("no inter-arrival time stored"));
        }
        let elapsed = now - self.state.last_timestamp as f64;
        let below = window.iter().filter(|&&x| x as f64 <= elapsed).count();
        Ok(below as f64 / window.len() as f64)
    }

    fn crossing_elapsed(&self, threshold: f64) -> Result<Option<f64>, DetectorError> {
        Ok(self.crossings(&[threshold])?[0])
    }

    fn crossings(&self, thresholds: &[f64]) -> Result<Vec<Option<f64>>, DetectorError> {
        if self.state.window.is_empty() {
            return Err(DetectorError::Unavailable("no inter-arrival time stored"));
        }
        let mut sorted: Vec<u64> = self.state.window.iter().copied().collect();
        sorted.sort_unstable();
        Ok(thresholds.iter().map(|&u| Self::elapsed_for_count(&sorted, u)).collect())
    }
}
