//! QoS metrics of failure detectors: detection time (TD), average mistake
//! rate (λM) and query accuracy probability (PA), plus threshold sweeps that
//! trace out the tradeoff curves between them.
//!
//! Suspicion is resolved analytically between consecutive heartbeats: each
//! detector reports the elapsed time at which its suspicion crosses U, so the
//! suspected stretches of a run are exact up to floating point. Queries are
//! taken at a fixed period instead of at random instants.

mod metrics;
mod sweep;

use thiserror::Error;

use crate::detectors::DetectorError;
use crate::simnet::SimError;

pub use metrics::{
    compute_detection_time, compute_mistake_rate, compute_query_accuracy, replay, DetectionTime, MonitoredRun,
    SuspicionTimeline,
};
pub use sweep::{
    sweep_thresholds, DetectorSweep, LossParams, QosReport, RunMetadata, SweepResult, SweepSpec, TraceParams,
    CSV_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QosError {
    #[error("invalid sweep field `{field}`: {msg}")]
    InvalidSpec { field: String, msg: String },
    #[error("invalid run: {0}")]
    InvalidRun(String),
    #[error("run has no crash")]
    NoCrash,
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
