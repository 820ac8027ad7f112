//! Accrual failure detectors.
//!
//! Three detectors share one contract ([`FailureDetector`]):
//!
//! * [`IotaDetector`] — Chebyshev one-sided suspicion over recursive
//!   mean/variance estimators, plus packet-loss and resource forecasting.
//!   Storage is constant regardless of the learning window.
//! * [`PhiDetector`] — the same estimators fed into the normal CDF.
//! * [`AdaptiveDetector`] — empirical distribution over a bounded window of
//!   stored inter-arrival times.
//!
//! All times handed to a detector are milliseconds. Heartbeat timestamps are
//! integral; query instants may be fractional so that crossing instants can be
//! resolved below one millisecond.

mod adaptive;
mod iota;
mod lagrange;
mod loss;
mod moments;
mod phi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adaptive::{AdaptiveDetector, AdaptiveDetectorState};
pub use iota::{IotaDetector, IotaDetectorState, ResourceForecast};
pub use lagrange::lagrange_eval;
pub use loss::PacketLossState;
pub use moments::{Estimate, EstimateSource, RunningMoments};
pub use phi::{PhiDetector, PhiDetectorState};

/// Variance floor (ms²) applied whenever an estimator reports zero spread.
pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Absolute resolution (ms) of the generic bisection crossing search.
pub const CROSSING_RESOLUTION_MS: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error("heartbeat {field} out of order: last {last}, got {got}")]
    OutOfOrder { field: &'static str, last: u64, got: u64 },
    #[error("resource level {0} outside [0, 1]")]
    InvalidResourceLevel(f64),
    #[error("detector unavailable: {0}")]
    Unavailable(&'static str),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
}

/// One received heartbeat.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeartbeatSample {
    /// Arrival time in milliseconds.
    pub timestamp: u64,
    pub seq: u64,
    /// Fraction of critical resources (e.g. battery) left at the sender.
    pub resource_level: f64,
}

impl HeartbeatSample {
    pub fn new(timestamp: u64, seq: u64) -> Self {
        Self { timestamp, seq, resource_level: 1.0 }
    }

    pub fn with_resource(mut self, level: f64) -> Self {
        self.resource_level = level;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Iota,
    Phi,
    Adaptive,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 3] = [DetectorKind::Iota, DetectorKind::Phi, DetectorKind::Adaptive];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Iota => "iota",
            DetectorKind::Phi => "phi",
            DetectorKind::Adaptive => "adaptive",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-link detector parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Suspicion threshold U; a peer is suspected once suspicion ≥ U.
    #[serde(rename = "threshold_U")]
    pub threshold: f64,
    /// Learning window: estimators reset after this many intervals.
    pub omega_max: u64,
    /// Intervals required after a reset before fresh estimates are trusted.
    pub omega_min: u64,
    /// Learning speed of the packet-loss average.
    pub alpha: f64,
    /// Mean inter-arrival (ms) assumed before anything was learned.
    pub bootstrap_period: f64,
    /// Inter-arrival variance (ms²) assumed before anything was learned.
    pub bootstrap_variance: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            omega_max: 500,
            omega_min: 10,
            alpha: 0.5,
            bootstrap_period: 1000.0,
            bootstrap_variance: 250_000.0,
        }
    }
}

impl DetectorConfig {
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn validate(&self) -> Result<(), DetectorError> {
        let bad = |msg: String| Err(DetectorError::InvalidConfig(msg));
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return bad(format!("threshold_U must be >= 0, got {}", self.threshold));
        }
        if self.omega_min < 2 {
            return bad(format!("omega_min must be >= 2, got {}", self.omega_min));
        }
        if self.omega_min > self.omega_max {
            return bad(format!("omega_min ({}) must not exceed omega_max ({})", self.omega_min, self.omega_max));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        if !(self.bootstrap_period.is_finite() && self.bootstrap_period > 0.0) {
            return bad(format!("bootstrap_period must be > 0, got {}", self.bootstrap_period));
        }
        if !(self.bootstrap_variance.is_finite() && self.bootstrap_variance >= 0.0) {
            return bad(format!("bootstrap_variance must be >= 0, got {}", self.bootstrap_variance));
        }
        Ok(())
    }
}

/// Common contract of every accrual detector.
pub trait FailureDetector {
    fn kind(&self) -> DetectorKind;

    fn config(&self) -> &DetectorConfig;

    fn record_heartbeat(&mut self, hb: &HeartbeatSample) -> Result<(), DetectorError>;

    /// Arrival time of the most recent heartbeat, if any.
    fn last_heartbeat_at(&self) -> Option<u64>;

    /// Suspicion level at `now` (ms). Non-decreasing in `now` until the next
    /// heartbeat is recorded.
    fn suspicion(&self, now: f64) -> Result<f64, DetectorError>;

    fn is_suspected(&self, now: f64) -> Result<bool, DetectorError> {
        Ok(self.suspicion(now)? >= self.config().threshold)
    }

    /// Smallest elapsed time (ms) since the last heartbeat at which
    /// suspicion reaches `threshold`, or `None` if it never does.
    fn crossing_elapsed(&self, threshold: f64) -> Result<Option<f64>, DetectorError> {
        bisect_crossing(self, threshold)
    }

    /// [`FailureDetector::crossing_elapsed`] for several thresholds at once.
    fn crossings(&self, thresholds: &[f64]) -> Result<Vec<Option<f64>>, DetectorError> {
        thresholds.iter().map(|&u| self.crossing_elapsed(u)).collect()
    }
}

/// Generic crossing search: exponential bracketing followed by bisection.
///
/// Relies only on monotonicity of the suspicion function after the last
/// heartbeat, so it works for any detector.
pub fn bisect_crossing<D: FailureDetector + ?Sized>(
    detector: &D,
    threshold: f64,
) -> Result<Option<f64>, DetectorError> {
    let last = detector.last_heartbeat_at().ok_or(DetectorError::Unavailable("no heartbeat received"))? as f64;
    let reached =
        |elapsed: f64| -> Result<bool, DetectorError> { Ok(detector.suspicion(last + elapsed)? >= threshold) };
    if reached(0.0)? {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !reached(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e15 {
            return Ok(None);
        }
    }
    while hi - lo > CROSSING_RESOLUTION_MS {
        let mid = 0.5 * (lo + hi);
        if reached(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Iota threshold that trips at the same deviation from the mean (in
/// standard deviations) as phi threshold `phi_threshold`. Both detectors
/// then suspect at the same instant whenever their estimates agree, which
/// lines their sweeps up point by point.
pub fn matched_iota_threshold(phi_threshold: f64) -> f64 {
    let k = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * 10f64.powf(-phi_threshold));
    if k.is_finite() && k > 0.0 {
        k.mul_add(k, 1.0).log10()
    } else if k > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// A detector of any kind, for callers that choose the kind at runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Iota(IotaDetector),
    Phi(PhiDetector),
    Adaptive(AdaptiveDetector),
}

impl Detector {
    pub fn new(kind: DetectorKind, config: DetectorConfig) -> Result<Self, DetectorError> {
        Ok(match kind {
            DetectorKind::Iota => Detector::Iota(IotaDetector::new(config)?),
            DetectorKind::Phi => Detector::Phi(PhiDetector::new(config)?),
            DetectorKind::Adaptive => Detector::Adaptive(AdaptiveDetector::new(config)?),
        })
    }

    fn inner(&self) -> &dyn FailureDetector {
        match self {
            Detector::Iota(d) => d,
            Detector::Phi(d) => d,
            Detector::Adaptive(d) => d,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn FailureDetector {
        match self {
            Detector::Iota(d) => d,
            Detector::Phi(d) => d,
            Detector::Adaptive(d) => d,
        }
    }
}

impl FailureDetector for Detector {
    fn kind(&self) -> DetectorKind {
        self.inner().kind()
    }

    fn config(&self) -> &DetectorConfig {
        self.inner().config()
    }

    fn record_heartbeat(&mut self, hb: &HeartbeatSample) -> Result<(), DetectorError> {
        self.inner_mut().record_heartbeat(hb)
    }

    fn last_heartbeat_at(&self) -> Option<u64> {
        self.inner().last_heartbeat_at()
    }

    fn suspicion(&self, now: f64) -> Result<f64, DetectorError> {
        self.inner().suspicion(now)
    }

    fn crossing_elapsed(&self, threshold: f64) -> Result<Option<f64>, DetectorError> {
        self.inner().crossing_elapsed(threshold)
    }

    fn crossings(&self, thresholds: &[f64]) -> Result<Vec<Option<f64>>, DetectorError> {
        self.inner().crossings(thresholds)
    }
}

/// Size in bytes of the fixed-width binary encoding of `value`.
///
/// Integers encode at their full width, so the result reflects storage
/// requirements rather than the magnitude of the stored numbers.
pub fn encoded_size<T: Serialize>(value: &T) -> usize {
    bincode::serialized_size(value).expect("detector state is always encodable") as usize
}

/// Shared ordering check for heartbeat timestamps and sequence numbers.
pub(crate) fn check_order(last: Option<(u64, u64)>, hb: &HeartbeatSample) -> Result<(), DetectorError> {
    if !(0.0..=1.0).contains(&hb.resource_level) {
        return Err(DetectorError::InvalidResourceLevel(hb.resource_level));
    }
    if let Some((last_ts, last_seq)) = last {
        if hb.timestamp <= last_ts {
            return Err(DetectorError::OutOfOrder { field: "timestamp", last: last_ts, got: hb.timestamp });
        }
        if hb.seq <= last_seq {
            return Err(DetectorError::OutOfOrder { field: "seq", last: last_seq, got: hb.seq });
        }
    }
    Ok(())
}
