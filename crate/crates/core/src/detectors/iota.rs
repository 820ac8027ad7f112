use serde::{Deserialize, Serialize};

use super::lagrange::lagrange_eval;
use super::moments::{Estimate, EstimateSource, RunningMoments};
use super::{
    check_order, DetectorConfig, DetectorError, DetectorKind, FailureDetector, HeartbeatSample, PacketLossState,
    VARIANCE_FLOOR,
};

/// Heartbeats kept for the resource forecast.
const RING: usize = 4;

/// Constant-size state of an iota detector.
///
/// Every field has a fixed width: the learning window only bounds the value of
/// `n`, it never sizes a buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IotaDetectorState {
    pub rho_sum: u128,
    pub kappa_sum: u128,
    pub n: u64,
    pub heartbeats: u64,
    pub last_timestamp: u64,
    pub has_frozen: bool,
    pub frozen_mu: f64,
    pub frozen_var: f64,
    pub omega_max: u64,
    pub omega_min: u64,
    pub loss_state: PacketLossState,
    pub resource_ring: [HeartbeatSample; RING],
    pub ring_len: u8,
}

impl IotaDetectorState {
    pub(crate) fn moments(&self) -> RunningMoments {
        RunningMoments { rho_sum: self.rho_sum, kappa_sum: self.kappa_sum, n: self.n }
    }

    fn store(&mut self, m: RunningMoments) {
        self.rho_sum = m.rho_sum;
        self.kappa_sum = m.kappa_sum;
        self.n = m.n;
    }
}

/// Resource level extrapolated from the last four heartbeats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceForecast {
    pub raw: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IotaDetector {
    pub config: DetectorConfig,
    pub state: IotaDetectorState,
}

impl IotaDetector {
    pub fn new(config: DetectorConfig) -> Result<Self, DetectorError> {
        config.validate()?;
        let state = IotaDetectorState {
            rho_sum: 0,
            kappa_sum: 0,
            n: 0,
            heartbeats: 0,
            last_timestamp: 0,
            has_frozen: false,
            frozen_mu: 0.0,
            frozen_var: 0.0,
            omega_max: config.omega_max,
            omega_min: config.omega_min,
            loss_state: PacketLossState::new(config.alpha),
            resource_ring: [HeartbeatSample::default(); RING],
            ring_len: 0,
        };
        Ok(Self { config, state })
    }

    fn freeze_and_reset(&mut self) {
        let m = self.state.moments();
        if let (Some(mu), Some(var)) = (m.mean(), m.sample_variance()) {
            self.state.has_frozen = true;
            self.state.frozen_mu = mu;
            self.state.frozen_var = var;
        }
        self.state.store(RunningMoments::default());
    }

    /// Current estimates: live once `omega_min` intervals are in the window,
    /// the frozen pre-reset values before that, bootstrap defaults otherwise.
    pub fn estimator_snapshot(&self) -> Estimate {
        let s = &self.state;
        let m = s.moments();
        if s.n >= s.omega_min {
            if let (Some(mean), Some(variance)) = (m.mean(), m.sample_variance()) {
                return Estimate { mean, variance, n: s.n, source: EstimateSource::Live };
            }
        }
        if s.has_frozen {
            return Estimate { mean: s.frozen_mu, variance: s.frozen_var, n: s.n, source: EstimateSource::Frozen };
        }
        Estimate {
            mean: self.config.bootstrap_period,
            variance: self.config.bootstrap_variance,
            n: s.n,
            source: EstimateSource::Bootstrap,
        }
    }

    pub fn packet_loss_estimate(&self) -> f64 {
        self.state.loss_state.estimate()
    }

    /// Degree-3 Lagrange extrapolation of the resource level at `future_t` (ms).
    pub fn resource_forecast(&self, future_t: f64) -> Result<ResourceForecast, DetectorError> {
        let s = &self.state;
        if usize::from(s.ring_len) < RING {
            return Err(DetectorError::Unavailable("resource forecast needs 4 heartbeats"));
        }
        // Abscissae relative to the newest heartbeat keep the basis well conditioned.
        let origin = s.resource_ring[RING - 1].timestamp as f64;
        let points: Vec<(f64, f64)> =
            s.resource_ring.iter().map(|hb| (hb.timestamp as f64 - origin, hb.resource_level)).collect();
        let raw = lagrange_eval(&points, future_t - origin);
        Ok(ResourceForecast { raw, clamped: raw.clamp(0.0, 1.0) })
    }
}

impl FailureDetector for IotaDetector {
    fn kind(&self) -> DetectorKind {
        DetectorKind::Iota
    }

    fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn record_heartbeat(&mut self, hb: &HeartbeatSample) -> Result<(), DetectorError> {
        let last = (self.state.heartbeats > 0).then_some((self.state.last_timestamp, self.state.loss_state.last_seq));
        check_order(last, hb)?;

        if self.state.heartbeats > 0 {
            let delta = hb.timestamp - self.state.last_timestamp;
            if self.state.n >= self.state.omega_max {
                self.freeze_and_reset();
            }
            let mut m = self.state.moments();
            if !m.push(delta) {
                self.freeze_and_reset();
                m = RunningMoments::default();
                let _ = m.push(delta);
            }
            self.state.store(m);
            self.state.loss_state.observe(hb.seq, self.state.omega_max);
        } else {
            self.state.loss_state.last_seq = hb.seq;
        }

        self.state.last_timestamp = hb.timestamp;
        self.state.heartbeats += 1;
        let ring = &mut self.state.resource_ring;
        ring.rotate_left(1);
        ring[RING - 1] = *hb;
        self.state.ring_len = (self.state.ring_len + 1).min(RING as u8);
        Ok(())
    }

    fn last_heartbeat_at(&self) -> Option<u64> {
        (self.state.heartbeats > 0).then_some(self.state.last_timestamp)
    }

    /// `log10(1 + d²/σ²)`, i.e. `−log10(σ²/(σ² + d²))`, for positive
    /// deviation `d` past the expected arrival; zero otherwise.
    fn suspicion(&self, now: f64) -> Result<f64, DetectorError> {
        let last = self.last_heartbeat_at().ok_or(DetectorError::Unavailable("no heartbeat received"))?;
        let est = self.estimator_snapshot();
        let d = now - last as f64 - est.mean;
        if d <= 0.0 {
            return Ok(0.0);
        }
        let var = est.variance.max(VARIANCE_FLOOR);
        Ok((d * d / var).ln_1p() / std::f64::consts::LN_10)
    }

    fn crossing_elapsed(&self, threshold: f64) -> Result<Option<f64>, DetectorError> {
        if self.last_heartbeat_at().is_none() {
            return Err(DetectorError::Unavailable("no heartbeat received"));
        }
        let est = self.estimator_snapshot();
        Ok(iota_crossing(est.mean, est.variance.max(VARIANCE_FLOOR), threshold))
    }
}

/// Elapsed time at which `log10(1 + d²/var)` first reaches `threshold`.
fn iota_crossing(mean: f64, var: f64, threshold: f64) -> Option<f64> {
    if threshold <= 0.0 {
        return Some(0.0);
    }
    let factor = (threshold * std::f64::consts::LN_10).exp_m1();
    if !factor.is_finite() {
        return None;
    }
    let d = (var * factor).sqrt();
    let elapsed = mean + d;
    elapsed.is_finite().then_some(elapsed.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(omega_max: u64, omega_min: u64) -> DetectorConfig {
        DetectorConfig { omega_max, omega_min, ..DetectorConfig::default() }
    }

    fn feed(d: &mut IotaDetector, times: &[u64]) {
        for (i, &t) in times.iter().enumerate() {
            d.record_heartbeat(&HeartbeatSample::new(t, i as u64)).unwrap();
        }
    }

    #[test]
    fn four_unit_heartbeats() {
        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        feed(&mut d, &[0, 1, 2, 3]);
        let s = &d.state;
        assert_eq!((s.n, s.rho_sum, s.kappa_sum), (3, 3, 3));
        let e = d.estimator_snapshot();
        assert_eq!((e.mean, e.variance, e.source), (1.0, 0.0, EstimateSource::Live));
    }

    #[test]
    fn first_heartbeat_records_no_interval() {
        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        feed(&mut d, &[42]);
        assert_eq!(d.state.n, 0);
        assert_eq!(d.last_heartbeat_at(), Some(42));
    }

    #[test]
    fn reset_at_window_end_freezes_previous_estimates() {
        let mut d = IotaDetector::new(cfg(3, 2)).unwrap();
        // intervals 1, 3, 2 then a fourth of 7
        feed(&mut d, &[0, 1, 4, 6, 13]);
        assert!(d.state.has_frozen);
        assert_eq!(d.state.frozen_mu, 2.0);
        assert_eq!(d.state.frozen_var, 1.0);
        assert_eq!((d.state.n, d.state.rho_sum, d.state.kappa_sum), (1, 7, 49));
        let e = d.estimator_snapshot();
        assert_eq!((e.mean, e.variance, e.source), (2.0, 1.0, EstimateSource::Frozen));
    }

    #[test]
    fn bootstrap_fallback_before_learning() {
        let c = DetectorConfig { bootstrap_period: 1.0, bootstrap_variance: 9.0, ..cfg(500, 10) };
        let mut d = IotaDetector::new(c).unwrap();
        feed(&mut d, &[0, 5]);
        let e = d.estimator_snapshot();
        assert_eq!((e.mean, e.variance, e.n, e.source), (1.0, 9.0, 1, EstimateSource::Bootstrap));
    }

    /// Detector whose estimate is exactly (mean, var) via the bootstrap path.
    fn with_estimate(mean: f64, var: f64) -> IotaDetector {
        let c = DetectorConfig { bootstrap_period: mean, bootstrap_variance: var, ..cfg(500, 2) };
        let mut d = IotaDetector::new(c).unwrap();
        feed(&mut d, &[0]);
        d
    }

    #[test]
    fn suspicion_worked_values() {
        let d = with_estimate(1.0, 1.0);
        assert_eq!(d.suspicion(1.0).unwrap(), 0.0);
        let s = d.suspicion(2.0).unwrap();
        assert!((s - 0.5f64.log10().abs()).abs() < 1e-12, "{s}");

        // σ² = 0 hits the variance floor
        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        feed(&mut d, &[0, 1, 2, 3]);
        let s = d.suspicion(5.0).unwrap();
        assert!((s - 9.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn suspicion_requires_a_heartbeat() {
        let d = IotaDetector::new(cfg(500, 2)).unwrap();
        assert!(matches!(d.suspicion(1.0), Err(DetectorError::Unavailable(_))));
    }

    #[test]
    fn ordering_violations_are_rejected() {
        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        feed(&mut d, &[10, 20]);
        let err = d.record_heartbeat(&HeartbeatSample::new(20, 5)).unwrap_err();
        assert!(matches!(err, DetectorError::OutOfOrder { field: "timestamp", .. }));
        let err = d.record_heartbeat(&HeartbeatSample::new(30, 1)).unwrap_err();
        assert!(matches!(err, DetectorError::OutOfOrder { field: "seq", .. }));
        let err = d.record_heartbeat(&HeartbeatSample::new(30, 9).with_resource(1.5)).unwrap_err();
        assert!(matches!(err, DetectorError::InvalidResourceLevel(_)));
    }

    #[test]
    fn seq_gaps_feed_the_loss_estimate() {
        let c = DetectorConfig { alpha: 0.5, ..cfg(500, 2) };
        let mut d = IotaDetector::new(c).unwrap();
        for (seq, t) in [(0u64, 0u64), (1, 10), (2, 20), (3, 30), (4, 40), (5, 50), (6, 60), (7, 70), (10, 100)] {
            d.record_heartbeat(&HeartbeatSample::new(t, seq)).unwrap();
        }
        assert!((d.packet_loss_estimate() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn resource_forecast_cases() {
        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        for (i, level) in [1.0, 0.9, 0.8].iter().enumerate() {
            d.record_heartbeat(&HeartbeatSample::new(i as u64, i as u64).with_resource(*level)).unwrap();
        }
        assert!(d.resource_forecast(5.0).is_err());
        d.record_heartbeat(&HeartbeatSample::new(3, 3).with_resource(0.7)).unwrap();
        let r = d.resource_forecast(5.0).unwrap();
        assert!((r.raw - 0.5).abs() < 1e-12);
        let r = d.resource_forecast(20.0).unwrap();
        assert!(r.raw < 0.0 && r.clamped == 0.0);

        let mut d = IotaDetector::new(cfg(500, 2)).unwrap();
        for i in 0..6u64 {
            d.record_heartbeat(&HeartbeatSample::new(1000 * i, i).with_resource(0.5)).unwrap();
        }
        assert!((d.resource_forecast(123_456.0).unwrap().raw - 0.5).abs() < 1e-9);
    }

    #[test]
    fn crossing_inverts_the_worked_example() {
        let d = with_estimate(1.0, 1.0);
        let e = d.crossing_elapsed(2f64.log10()).unwrap().unwrap();
        assert!((e - 2.0).abs() < 1e-12);
        assert_eq!(d.crossing_elapsed(0.0).unwrap(), Some(0.0));
        assert_eq!(d.crossing_elapsed(400.0).unwrap(), None);
    }
}
