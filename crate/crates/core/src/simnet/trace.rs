use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SimError;

fn default_clamp_floor() -> f64 {
    1e-3
}

/// Heartbeat inter-arrival distribution: normal, clamped from below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    pub mean: f64,
    pub variance: f64,
    /// Last admissible send time.
    pub duration: f64,
    pub seed: u64,
    #[serde(default = "default_clamp_floor")]
    pub clamp_floor: f64,
}

impl TraceSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |field: &str, msg: String| Err(SimError::InvalidSpec { field: field.to_string(), msg });
        if !self.mean.is_finite() {
            return bad("mean", format!("must be finite, got {}", self.mean));
        }
        if !(self.variance.is_finite() && self.variance >= 0.0) {
            return bad("variance", format!("must be >= 0, got {}", self.variance));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad("duration", format!("must be > 0, got {}", self.duration));
        }
        if !(self.clamp_floor.is_finite() && self.clamp_floor >= 0.0) {
            return bad("clamp_floor", format!("must be >= 0, got {}", self.clamp_floor));
        }
        if self.clamp_floor == 0.0 && self.mean <= 0.0 {
            return bad("clamp_floor", "must be > 0 when mean <= 0".to_string());
        }
        Ok(())
    }
}

/// One heartbeat of a generated trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceHeartbeat {
    pub seq: u64,
    /// Simulated send time.
    pub time: f64,
    /// `time` in detector milliseconds (one simulated time unit = 1000 ms).
    pub millis: u64,
}

/// Simulated time units to detector milliseconds, rounding half up.
pub fn to_millis(time: f64) -> u64 {
    (time * 1000.0 + 0.5).floor().max(0.0) as u64
}

/// Seeded stream of inter-arrival draws.
pub struct IntervalSampler {
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    floor: f64,
}

impl IntervalSampler {
    pub fn new(spec: &TraceSpec) -> Result<Self, SimError> {
        spec.validate()?;
        let normal = Normal::new(spec.mean, spec.variance.sqrt())
            .map_err(|e| SimError::InvalidSpec { field: "variance".into(), msg: e.to_string() })?;
        Ok(Self { rng: ChaCha8Rng::seed_from_u64(spec.seed), normal, floor: spec.clamp_floor })
    }

    /// Unclamped normal draw.
    pub fn next_raw(&mut self) -> f64 {
        self.normal.sample(&mut self.rng)
    }

    pub fn next_interval(&mut self) -> f64 {
        self.next_raw().max(self.floor)
    }
}

/// Heartbeat send times over `[0, duration]`, starting with seq 0 at time 0.
///
/// Millisecond stamps are forced strictly increasing, so a zero clamp floor
/// still yields a trace the detectors accept.
pub fn generate_heartbeat_trace(spec: &TraceSpec) -> Result<Vec<TraceHeartbeat>, SimError> {
    let mut sampler = IntervalSampler::new(spec)?;
    let mut out = vec![TraceHeartbeat { seq: 0, time: 0.0, millis: 0 }];
    let mut t = 0.0;
    loop {
        t += sampler.next_interval();
        if t > spec.duration {
            break;
        }
        let prev = out.last().expect("trace starts non-empty");
        let millis = to_millis(t).max(prev.millis + 1);
        out.push(TraceHeartbeat { seq: prev.seq + 1, time: t, millis });
    }
    Ok(out)
}
