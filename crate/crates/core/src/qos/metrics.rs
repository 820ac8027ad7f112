use serde::{Deserialize, Serialize};

use crate::detectors::{Detector, DetectorConfig, DetectorError, DetectorKind, FailureDetector, HeartbeatSample};

use super::QosError;

/// What one monitor observed, plus ground truth. Times are simulated units
/// (1 unit = 1000 detector milliseconds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredRun {
    /// Delivered heartbeats in arrival order.
    pub arrivals: Vec<HeartbeatSample>,
    /// Metrics only consider `[eval_start, end)`.
    pub eval_start: f64,
    pub end: f64,
    pub crash_time: Option<f64>,
}

impl MonitoredRun {
    fn validate(&self) -> Result<(), QosError> {
        if !(self.eval_start.is_finite() && self.end.is_finite() && self.eval_start < self.end) {
            return Err(QosError::InvalidRun(format!(
                "need eval_start < end, got [{}, {})",
                self.eval_start, self.end
            )));
        }
        if let Some(c) = self.crash_time {
            if !(c >= self.eval_start && c <= self.end) {
                return Err(QosError::InvalidRun(format!("crash time {c} outside the evaluated span")));
            }
            if let Some(late) = self.arrivals.iter().find(|hb| ms_to_units(hb.timestamp) > c) {
                return Err(QosError::InvalidRun(format!(
                    "heartbeat at {} arrives after the crash at {c}",
                    ms_to_units(late.timestamp)
                )));
            }
        }
        Ok(())
    }

    /// Length of the evaluated span during which the node was alive.
    pub fn alive_duration(&self) -> f64 {
        self.crash_time.unwrap_or(self.end) - self.eval_start
    }
}

pub(crate) fn ms_to_units(ms: u64) -> f64 {
    ms as f64 / 1000.0
}

/// Suspected stretches of a replayed run for each threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct SuspicionTimeline {
    pub thresholds: Vec<f64>,
    /// Per threshold: disjoint, sorted `[from, to)` intervals of suspicion.
    pub suspected: Vec<Vec<(f64, f64)>>,
    pub eval_start: f64,
    pub end: f64,
    pub crash_time: Option<f64>,
}

/// Replays `run` through a fresh detector and resolves, between each pair of
/// consecutive heartbeats, the instant suspicion crosses every threshold.
pub fn replay(
    kind: DetectorKind,
    config: DetectorConfig,
    run: &MonitoredRun,
    thresholds: &[f64],
) -> Result<SuspicionTimeline, QosError> {
    run.validate()?;
    let mut detector = Detector::new(kind, config)?;
    let mut suspected: Vec<Vec<(f64, f64)>> = vec![Vec::new(); thresholds.len()];

    for (i, hb) in run.arrivals.iter().enumerate() {
        detector.record_heartbeat(hb)?;
        let start = ms_to_units(hb.timestamp);
        let stop = run.arrivals.get(i + 1).map_or(run.end, |next| ms_to_units(next.timestamp)).min(run.end);
        if stop <= start {
            continue;
        }
        let crossings = match detector.crossings(thresholds) {
            Ok(c) => c,
            Err(DetectorError::Unavailable(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        for (intervals, crossing) in suspected.iter_mut().zip(crossings) {
            let Some(elapsed_ms) = crossing else { continue };
            let from = start + elapsed_ms / 1000.0;
            if from >= stop {
                continue;
            }
            match intervals.last_mut() {
                Some(last) if last.1 >= from => last.1 = stop,
                _ => intervals.push((from, stop)),
            }
        }
    }

    Ok(SuspicionTimeline {
        thresholds: thresholds.to_vec(),
        suspected,
        eval_start: run.eval_start,
        end: run.end,
        crash_time: run.crash_time,
    })
}

/// Detection time of a crash; `censored` when suspicion never became
/// permanent before the end of the run (the value is then a lower bound).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionTime {
    pub value: f64,
    pub censored: bool,
}

impl SuspicionTimeline {
    pub fn is_suspected(&self, index: usize, t: f64) -> bool {
        self.suspected[index].iter().any(|&(a, b)| a <= t && t < b)
    }

    /// Time from the crash until suspicion starts and holds through the end.
    pub fn detection_time(&self, index: usize) -> Result<DetectionTime, QosError> {
        let crash = self.crash_time.ok_or(QosError::NoCrash)?;
        match self.suspected[index].last() {
            Some(&(from, to)) if to >= self.end => {
                Ok(DetectionTime { value: from.max(crash) - crash, censored: false })
            }
            _ => Ok(DetectionTime { value: self.end - crash, censored: true }),
        }
    }

    /// Number of not-suspected → suspected transitions while the node is alive.
    pub fn mistakes(&self, index: usize) -> usize {
        let alive_until = self.crash_time.unwrap_or(self.end);
        self.suspected[index].iter().filter(|&&(from, _)| from >= self.eval_start && from < alive_until).count()
    }

    pub fn mistake_rate(&self, index: usize) -> f64 {
        let alive = self.crash_time.unwrap_or(self.end) - self.eval_start;
        if alive <= 0.0 {
            return 0.0;
        }
        self.mistakes(index) as f64 / alive
    }

    /// `(correct, total)` over periodic query instants in `[eval_start, end)`.
    pub fn query_counts(&self, index: usize, sampling_period: f64) -> Result<(u64, u64), QosError> {
        if !(sampling_period.is_finite() && sampling_period > 0.0) {
            return Err(QosError::InvalidRun(format!("sampling period must be > 0, got {sampling_period}")));
        }
        let intervals = &self.suspected[index];
        let mut cursor = 0;
        let (mut correct, mut total) = (0u64, 0u64);
        for j in 0u64.. {
            let t = self.eval_start + j as f64 * sampling_period;
            if t >= self.end {
                break;
            }
            while cursor < intervals.len() && intervals[cursor].1 <= t {
                cursor += 1;
            }
            let suspected = intervals.get(cursor).is_some_and(|&(a, _)| a <= t);
            let crashed = self.crash_time.is_some_and(|c| t >= c);
            correct += u64::from(suspected == crashed);
            total += 1;
        }
        Ok((correct, total))
    }

    pub fn query_accuracy(&self, index: usize, sampling_period: f64) -> Result<f64, QosError> {
        let (correct, total) = self.query_counts(index, sampling_period)?;
        Ok(if total == 0 { 1.0 } else { correct as f64 / total as f64 })
    }
}

/// Detection time of `kind` at threshold `threshold` on `run`.
pub fn compute_detection_time(
    run: &MonitoredRun,
    kind: DetectorKind,
    config: DetectorConfig,
    threshold: f64,
) -> Result<DetectionTime, QosError> {
    replay(kind, config, run, &[threshold])?.detection_time(0)
}

/// Wrong suspicions of a live node per simulated time unit.
pub fn compute_mistake_rate(
    run: &MonitoredRun,
    kind: DetectorKind,
    config: DetectorConfig,
    threshold: f64,
) -> Result<f64, QosError> {
    if run.alive_duration() <= 0.0 {
        return Err(QosError::InvalidRun("alive interval must have positive length".into()));
    }
    Ok(replay(kind, config, run, &[threshold])?.mistake_rate(0))
}

/// Fraction of periodic queries answered correctly.
pub fn compute_query_accuracy(
    run: &MonitoredRun,
    kind: DetectorKind,
    config: DetectorConfig,
    threshold: f64,
    sampling_period: f64,
) -> Result<f64, QosError> {
    replay(kind, config, run, &[threshold])?.query_accuracy(0, sampling_period)
}
