use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectorConfig, DetectorKind, HeartbeatSample};
use crate::seed::derive_seed;
use crate::simnet::{apply_burst_loss, generate_heartbeat_trace, BurstLossModel, TraceSpec};

use super::metrics::{replay, MonitoredRun};
use super::QosError;

pub const CSV_HEADER: &str = "detector,threshold,detection_time,mistake_rate,query_accuracy,censored";

/// Heartbeat timing of the benchmark; seeds come from the sweep's master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub mean: f64,
    pub variance: f64,
    /// Send horizon per run; the node crashes at this instant.
    pub duration: f64,
    #[serde(default = "default_clamp_floor")]
    pub clamp_floor: f64,
}

fn default_clamp_floor() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossParams {
    pub burst_rate: f64,
    pub burst_len_min: u32,
    pub burst_len_max: u32,
}

impl Default for LossParams {
    fn default() -> Self {
        let m = BurstLossModel::default();
        Self { burst_rate: m.burst_rate, burst_len_min: m.burst_len_min, burst_len_max: m.burst_len_max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSweep {
    pub kind: DetectorKind,
    #[serde(default)]
    pub config: DetectorConfig,
    /// Strictly increasing thresholds U.
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub seed: u64,
    pub trace: TraceParams,
    /// Omit for a loss-free network.
    #[serde(default)]
    pub loss: Option<LossParams>,
    pub detectors: Vec<DetectorSweep>,
    /// Independent runs, each ending in one crash.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Heartbeats excluded from the metrics while detectors learn.
    #[serde(default)]
    pub warmup_heartbeats: usize,
    /// Observation time after the crash.
    pub post_crash_horizon: f64,
    /// Query period; defaults to a tenth of the mean inter-arrival time.
    #[serde(default)]
    pub sampling_period: Option<f64>,
}

fn default_runs() -> usize {
    1
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), QosError> {
        let bad = |field: String, msg: String| Err(QosError::InvalidSpec { field, msg });
        if self.detectors.is_empty() {
            return bad("detectors".into(), "at least one detector required".into());
        }
        for (i, d) in self.detectors.iter().enumerate() {
            d.config.validate().or_else(|e| bad(format!("detectors[{i}].config"), e.to_string()))?;
            if d.thresholds.is_empty() {
                return bad(format!("detectors[{i}].thresholds"), "must not be empty".into());
            }
            if d.thresholds.iter().any(|u| u.is_nan() || *u < 0.0) {
                return bad(format!("detectors[{i}].thresholds"), "must be >= 0".into());
            }
            if d.thresholds.windows(2).any(|w| w[1] <= w[0]) {
                return bad(format!("detectors[{i}].thresholds"), "must be strictly increasing".into());
            }
        }
        if self.runs == 0 {
            return bad("runs".into(), "must be >= 1".into());
        }
        if !(self.post_crash_horizon.is_finite() && self.post_crash_horizon > 0.0) {
            return bad("post_crash_horizon".into(), format!("must be > 0, got {}", self.post_crash_horizon));
        }
        if let Some(p) = self.sampling_period {
            if !(p.is_finite() && p > 0.0) {
                return bad("sampling_period".into(), format!("must be > 0, got {p}"));
            }
        }
        self.trace_spec(0).validate().or_else(|e| bad(format!("trace.{}", field_of(&e)), e.to_string()))?;
        if let Some(loss) = self.loss_model(0) {
            loss.validate().or_else(|e| bad(format!("loss.{}", field_of(&e)), e.to_string()))?;
        }
        if self.trace.mean.is_nan() || self.trace.mean <= 0.0 {
            return bad("trace.mean".into(), "must be > 0".into());
        }
        Ok(())
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period.unwrap_or(self.trace.mean / 10.0)
    }

    pub fn trace_spec(&self, run: usize) -> TraceSpec {
        TraceSpec {
            mean: self.trace.mean,
            variance: self.trace.variance,
            duration: self.trace.duration,
            seed: derive_seed(self.seed, &format!("trace/{run}")),
            clamp_floor: self.trace.clamp_floor,
        }
    }

    pub fn loss_model(&self, run: usize) -> Option<BurstLossModel> {
        self.loss.as_ref().map(|l| BurstLossModel {
            burst_rate: l.burst_rate,
            burst_len_min: l.burst_len_min,
            burst_len_max: l.burst_len_max,
            seed: derive_seed(self.seed, &format!("loss/{run}")),
        })
    }

    /// The delivered heartbeats of run `run`, ready for replay.
    pub fn monitored_run(&self, run: usize) -> Result<MonitoredRun, QosError> {
        let sent = generate_heartbeat_trace(&self.trace_spec(run))?;
        let warmup_end = sent.get(self.warmup_heartbeats).map(|hb| hb.millis as f64 / 1000.0).ok_or_else(|| {
            QosError::InvalidSpec {
                field: "warmup_heartbeats".into(),
                msg: format!("trace only has {} heartbeats", sent.len()),
            }
        })?;
        let delivered = match self.loss_model(run) {
            Some(model) => apply_burst_loss(&sent, &model)?,
            None => sent,
        };
        let crash = self.trace.duration;
        Ok(MonitoredRun {
            arrivals: delivered.iter().map(|hb| HeartbeatSample::new(hb.millis, hb.seq)).collect(),
            eval_start: warmup_end,
            end: crash + self.post_crash_horizon,
            crash_time: Some(crash),
        })
    }
}

fn field_of(e: &crate::simnet::SimError) -> String {
    match e {
        crate::simnet::SimError::InvalidSpec { field, .. } => field.clone(),
        _ => String::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub master_seed: u64,
    pub trace_seeds: Vec<u64>,
    pub loss_seeds: Vec<u64>,
    pub runs: usize,
    pub omega_max: u64,
    pub omega_min: u64,
    pub alpha: f64,
}

/// Metrics of one detector at one threshold, aggregated over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosReport {
    pub detector_kind: DetectorKind,
    #[serde(rename = "threshold_U")]
    pub threshold: f64,
    /// Mean detection time over runs.
    pub detection_time: f64,
    /// Mistakes per time unit, pooled over runs.
    pub mistake_rate: f64,
    /// Correct answers over all queries, pooled over runs.
    pub query_accuracy: f64,
    /// Some run never detected the crash within the horizon.
    pub censored: bool,
    pub run_metadata: RunMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub reports: Vec<QosReport>,
}

impl SweepResult {
    pub fn for_kind(&self, kind: DetectorKind) -> impl Iterator<Item = &QosReport> {
        self.reports.iter().filter(move |r| r.detector_kind == kind)
    }

    /// `(detection_time, mistake_rate)` points of one detector, in threshold order.
    pub fn mistake_curve(&self, kind: DetectorKind) -> Vec<(f64, f64)> {
        self.for_kind(kind).map(|r| (r.detection_time, r.mistake_rate)).collect()
    }

    /// `(detection_time, query_accuracy)` points of one detector.
    pub fn accuracy_curve(&self, kind: DetectorKind) -> Vec<(f64, f64)> {
        self.for_kind(kind).map(|r| (r.detection_time, r.query_accuracy)).collect()
    }

    pub fn to_csv(&self, kind: DetectorKind) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.for_kind(kind) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.detector_kind, r.threshold, r.detection_time, r.mistake_rate, r.query_accuracy, r.censored
            );
        }
        out
    }
}

/// Runs every detector of `spec` at every threshold over the same seeded runs.
pub fn sweep_thresholds(spec: &SweepSpec) -> Result<SweepResult, QosError> {
    spec.validate()?;
    let runs: Vec<MonitoredRun> = (0..spec.runs).map(|r| spec.monitored_run(r)).collect::<Result<_, _>>()?;
    let period = spec.sampling_period();
    let trace_seeds: Vec<u64> = (0..spec.runs).map(|r| spec.trace_spec(r).seed).collect();
    let loss_seeds: Vec<u64> = (0..spec.runs).filter_map(|r| spec.loss_model(r).map(|m| m.seed)).collect();

    let per_detector: Vec<Result<Vec<QosReport>, QosError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .detectors
            .iter()
            .map(|sweep| {
                let runs = &runs;
                let (trace_seeds, loss_seeds) = (&trace_seeds, &loss_seeds);
                scope.spawn(move || {
                    let metadata = RunMetadata {
                        master_seed: spec.seed,
                        trace_seeds: trace_seeds.clone(),
                        loss_seeds: loss_seeds.clone(),
                        runs: spec.runs,
                        omega_max: sweep.config.omega_max,
                        omega_min: sweep.config.omega_min,
                        alpha: sweep.config.alpha,
                    };
                    sweep_one(sweep, runs, period, metadata)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });

    let mut reports = Vec::new();
    for r in per_detector {
        reports.extend(r?);
    }
    Ok(SweepResult { reports })
}

fn sweep_one(
    sweep: &DetectorSweep,
    runs: &[MonitoredRun],
    period: f64,
    metadata: RunMetadata,
) -> Result<Vec<QosReport>, QosError> {
    let k = sweep.thresholds.len();
    let mut td_sum = vec![0.0; k];
    let mut censored = vec![false; k];
    let mut mistakes = vec![0usize; k];
    let mut correct = vec![0u64; k];
    let mut queries = vec![0u64; k];
    let mut alive = 0.0;
    for run in runs {
        let timeline = replay(sweep.kind, sweep.config, run, &sweep.thresholds)?;
        alive += run.alive_duration();
        for i in 0..k {
            let td = timeline.detection_time(i)?;
            td_sum[i] += td.value;
            censored[i] |= td.censored;
            mistakes[i] += timeline.mistakes(i);
            let (c, q) = timeline.query_counts(i, period)?;
            correct[i] += c;
            queries[i] += q;
        }
    }
    Ok((0..k)
        .map(|i| QosReport {
            detector_kind: sweep.kind,
            threshold: sweep.thresholds[i],
            detection_time: td_sum[i] / runs.len() as f64,
            mistake_rate: if alive > 0.0 { mistakes[i] as f64 / alive } else { 0.0 },
            query_accuracy: if queries[i] == 0 { 1.0 } else { correct[i] as f64 / queries[i] as f64 },
            censored: censored[i],
            run_metadata: metadata.clone(),
        })
        .collect())
}
