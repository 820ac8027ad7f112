use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use super::moments::{Estimate, EstimateSource, RunningMoments};
use super::{
    check_order, DetectorConfig, DetectorError, DetectorKind, FailureDetector, HeartbeatSample, VARIANCE_FLOOR,
};

/// Recursive estimator state of the phi-accrual detector.
///
/// Same accumulators as the iota detector. There is no refresh period: the
/// frozen values only cover the stretch after a reset where fewer than two
/// intervals make the variance undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiDetectorState {
    pub rho_sum: u128,
    pub kappa_sum: u128,
    pub n: u64,
    pub heartbeats: u64,
    pub last_timestamp: u64,
    pub last_seq: u64,
    pub has_frozen: bool,
    pub frozen_mu: f64,
    pub frozen_var: f64,
    pub omega_max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiDetector {
    pub config: DetectorConfig,
    pub state: PhiDetectorState,
}

impl PhiDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, DetectorError> {
        config.validate()?;
        let state = PhiDetectorState {
            rho_sum: 0,
            kappa_sum: 0,
            n: 0,
            heartbeats: 0,
            last_timestamp: 0,
            last_seq: 0,
            has_frozen: false,
            frozen_mu: 0.0,
            frozen_var: 0.0,
            omega_max: config.omega_max,
        };
        Ok(Self { config, state })
    }

    fn moments(&self) -> RunningMoments {
        RunningMoments { rho_sum: self.state.rho_sum, kappa_sum: self.state.kappa_sum, n: self.state.n }
    }

    fn store(&mut self, m: RunningMoments) {
        self.state.rho_sum = m.rho_sum;
        self.state.kappa_sum = m.kappa_sum;
        self.state.n = m.n;
    }

    fn freeze_and_reset(&mut self) {
        let m = self.moments();
        if let (Some(mu), Some(var)) = (m.mean(), m.sample_variance()) {
            self.state.has_frozen = true;
            self.state.frozen_mu = mu;
            self.state.frozen_var = var;
        }
        self.store(RunningMoments::default());
    }

    pub fn estimator_snapshot(&self) -> Estimate {
        let m = self.moments();
        let n = self.state.n;
        if let (Some(mean), Some(variance)) = (m.mean(), m.sample_variance()) {
            return Estimate { mean, variance, n, source: EstimateSource::Live };
        }
        if self.state.has_frozen {
            return Estimate {
                mean: self.state.frozen_mu,
                variance: self.state.frozen_var,
                n,
                source: EstimateSource::Frozen,
            };
        }
        Estimate {
            mean: self.config.bootstrap_period,
            variance: self.config.bootstrap_variance,
            n,
            source: EstimateSource::Bootstrap,
        }
    }
}

impl FailureDetector for PhiDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Phi
    }

    fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn record_heartbeat(&mut self, hb: &HeartbeatSample) -> Result<(), DetectorError> {
        let last = (self.state.heartbeats > 0).then_some((self.state.last_timestamp, self.state.last_seq));
        check_order(last, hb)?;
        if self.state.heartbeats > 0 {
            let delta = hb.timestamp - self.state.last_timestamp;
            if self.state.n >= self.state.omega_max {
                self.freeze_and_reset();
            }
            let mut m = self.moments();
            if !m.push(delta) {
                self.freeze_and_reset();
                m = RunningMoments::default();
                let _ = m.push(delta);
            }
            self.store(m);
        }
        self.state.last_timestamp = hb.timestamp;
        self.state.last_seq = hb.seq;
        self.state.heartbeats += 1;
        Ok(())
    }

    fn last_heartbeat_at(&self) -> Option<u64> {
        (self.state.heartbeats > 0).then_some(self.state.last_timestamp)
    }

    /// `−log10(1 − F(elapsed))` with `F` the normal CDF of the estimates.
    fn suspicion(&self, now: f64) -> Result<f64, DetectorError> {
        let last = self.last_heartbeat_at().ok_or(DetectorError::Unavailable("no heartbeat received"))?;
        let est = self.estimator_snapshot();
        let sigma = est.variance.max(VARIANCE_FLOOR).sqrt();
        let z = (now - last as f64 - est.mean) / sigma;
        let tail = 0.5 * erfc(z / std::f64::consts::SQRT_2);
        Ok(if tail > 0.0 { (-tail.log10()).max(0.0) } else { f64::INFINITY })
    }

    fn crossing_elapsed(&self, threshold: f64) -> Result<Option<f64>, DetectorError> {
        if self.last_heartbeat_at().is_none() {
            return Err(DetectorError::Unavailable("no heartbeat received"));
        }
        if threshold <= 0.0 {
            return Ok(Some(0.0));
        }
        let tail = 10f64.powf(-threshold);
        if tail <= 0.0 || !tail.is_finite() {
            return Ok(None);
        }
        if tail >= 1.0 {
            return Ok(Some(0.0));
        }
        let est = self.estimator_snapshot();
        let sigma = est.variance.max(VARIANCE_FLOOR).sqrt();
        let z = std::f64::consts::SQRT_2 * erfc_inv(2.0 * tail);
        let elapsed = est.mean + sigma * z;
        Ok(elapsed.is_finite().then_some(elapsed.max(0.0)))
    }
}
