use choreo_core::detectors::{
    matched_iota_threshold, AdaptiveDetector, Detector, DetectorConfig, DetectorError, DetectorKind, EstimateSource,
    FailureDetector, HeartbeatSample, IotaDetector, PhiDetector,
};
use proptest::prelude::*;

fn feed<D: FailureDetector>(d: &mut D, intervals: &[u64]) -> u64 {
    let mut t = 0;
    d.record_heartbeat(&HeartbeatSample::new(0, 0)).unwrap();
    for (i, x) in intervals.iter().enumerate() {
        t += x;
        d.record_heartbeat(&HeartbeatSample::new(t, i as u64 + 1)).unwrap();
    }
    t
}

fn kind_strategy() -> impl Strategy<Value = DetectorKind> {
    prop_oneof![Just(DetectorKind::Iota), Just(DetectorKind::Phi), Just(DetectorKind::Adaptive)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn suspicion_is_non_decreasing_between_heartbeats(
        kind in kind_strategy(),
        intervals in prop::collection::vec(1u64..5000, 2..200),
        omega_max in 10u64..300,
        steps in prop::collection::vec(0.0f64..400.0, 1..60),
    ) {
        let cfg = DetectorConfig { omega_max, ..DetectorConfig::default() };
        let mut d = Detector::new(kind, cfg).unwrap();
        let last = feed(&mut d, &intervals) as f64;
        let mut t = last;
        let mut prev = d.suspicion(t).unwrap();
        for s in steps {
            t += s;
            let now = d.suspicion(t).unwrap();
            prop_assert!(now >= prev, "{kind}: {now} < {prev} at +{}", t - last);
            prev = now;
        }
    }

    #[test]
    fn crossing_is_where_suspicion_reaches_the_threshold(
        kind in kind_strategy(),
        intervals in prop::collection::vec(1u64..5000, 12..100),
        u in 0.05f64..0.95,
    ) {
        let mut d = Detector::new(kind, DetectorConfig::default()).unwrap();
        let last = feed(&mut d, &intervals) as f64;
        if let Some(e) = d.crossing_elapsed(u).unwrap() {
            prop_assert!(d.suspicion(last + e + 1e-2).unwrap() >= u);
            if e > 1e-2 {
                prop_assert!(d.suspicion(last + e - 1e-2).unwrap() < u);
            }
        } else {
            prop_assert!(d.suspicion(last + 1e9).unwrap() < u);
        }
    }

    #[test]
    fn adaptive_window_is_bounded_and_suspicion_is_a_probability(
        intervals in prop::collection::vec(1u64..5000, 1..400),
        omega_max in 10u64..200,
        elapsed in 0.0f64..10000.0,
    ) {
        let mut d = AdaptiveDetector::new(DetectorConfig { omega_max, ..DetectorConfig::default() }).unwrap();
        let last = feed(&mut d, &intervals) as f64;
        prop_assert_eq!(d.window().len(), intervals.len().min(omega_max as usize));
        let tail = &intervals[intervals.len().saturating_sub(omega_max as usize)..];
        prop_assert!(d.window().iter().eq(tail.iter()));
        let s = d.suspicion(last + elapsed).unwrap();
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn live_estimates_follow_the_current_window(
        intervals in prop::collection::vec(1u64..100_000, 2..1200),
        omega_max in 10u64..500,
    ) {
        let cfg = DetectorConfig { omega_max, omega_min: 10.min(omega_max), ..DetectorConfig::default() };
        let mut d = IotaDetector::new(cfg).unwrap();
        feed(&mut d, &intervals);
        // the window restarts every omega_max intervals
        let n = intervals.len() as u64;
        let in_window = if n <= omega_max { n } else { (n - 1) % omega_max + 1 };
        let e = d.estimator_snapshot();
        prop_assert_eq!(e.n, in_window);
        if in_window >= cfg.omega_min {
            let w: Vec<f64> = intervals[intervals.len() - in_window as usize..].iter().map(|&x| x as f64).collect();
            let m = w.iter().sum::<f64>() / w.len() as f64;
            prop_assert_eq!(e.source, EstimateSource::Live);
            prop_assert!((e.mean - m).abs() <= 1e-9 * m);
        } else {
            prop_assert_eq!(e.source, EstimateSource::Frozen);
        }
    }

    #[test]
    fn matched_thresholds_trip_together(
        intervals in prop::collection::vec(500u64..1500, 10..60),
        u in 0.35f64..8.0,
    ) {
        let cfg = DetectorConfig { omega_min: 2, ..DetectorConfig::default() };
        let mut phi = PhiDetector::new(cfg).unwrap();
        let mut iota = IotaDetector::new(cfg).unwrap();
        feed(&mut phi, &intervals);
        feed(&mut iota, &intervals);
        let a = phi.crossing_elapsed(u).unwrap().unwrap();
        let b = iota.crossing_elapsed(matched_iota_threshold(u)).unwrap().unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn bootstrap_then_live() {
    let cfg = DetectorConfig {
        omega_min: 3,
        bootstrap_period: 700.0,
        bootstrap_variance: 100.0,
        ..DetectorConfig::default()
    };
    let mut d = IotaDetector::new(cfg).unwrap();
    feed(&mut d, &[1000, 1000]);
    assert_eq!(d.estimator_snapshot().source, EstimateSource::Bootstrap);
    assert_eq!(d.estimator_snapshot().mean, 700.0);
    d.record_heartbeat(&HeartbeatSample::new(3000, 3)).unwrap();
    let e = d.estimator_snapshot();
    assert_eq!((e.source, e.mean), (EstimateSource::Live, 1000.0));
}

#[test]
fn heartbeats_must_move_forward() {
    for kind in DetectorKind::ALL {
        let mut d = Detector::new(kind, DetectorConfig::default()).unwrap();
        d.record_heartbeat(&HeartbeatSample::new(1000, 5)).unwrap();
        assert!(matches!(d.record_heartbeat(&HeartbeatSample::new(1000, 6)), Err(DetectorError::OutOfOrder { .. })));
        assert!(matches!(d.record_heartbeat(&HeartbeatSample::new(2000, 5)), Err(DetectorError::OutOfOrder { .. })));
        d.record_heartbeat(&HeartbeatSample::new(2000, 9)).unwrap();
    }
}

#[test]
fn no_heartbeat_no_verdict() {
    for kind in DetectorKind::ALL {
        let d = Detector::new(kind, DetectorConfig::default()).unwrap();
        assert!(matches!(d.suspicion(10.0), Err(DetectorError::Unavailable(_))));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let base = DetectorConfig::default();
    for bad in [
        DetectorConfig { omega_min: 1, ..base },
        DetectorConfig { omega_min: 600, ..base },
        DetectorConfig { alpha: 1.5, ..base },
        DetectorConfig { threshold: -1.0, ..base },
        DetectorConfig { bootstrap_period: 0.0, ..base },
    ] {
        for kind in DetectorKind::ALL {
            assert!(matches!(Detector::new(kind, bad), Err(DetectorError::InvalidConfig(_))), "{bad:?}");
        }
    }
}

#[test]
fn iota_loss_estimate_sees_gaps() {
    let mut d = IotaDetector::new(DetectorConfig::default()).unwrap();
    for (i, seq) in [0u64, 1, 2, 5, 6, 7].iter().enumerate() {
        d.record_heartbeat(&HeartbeatSample::new(i as u64 * 1000, *seq)).unwrap();
    }
    assert!(d.packet_loss_estimate() > 0.0);
}
