use choreo_core::simnet::{
    apply_burst_loss, generate_heartbeat_trace, read_log, run_simulation, write_log, BurstLossModel, DeliveryHandler,
    EventKind, IntervalSampler, SimEvent, TraceSpec,
};
use proptest::prelude::*;

fn spec(seed: u64) -> TraceSpec {
    TraceSpec { mean: 1.0, variance: 9.0, duration: 2000.0, seed, clamp_floor: 1e-3 }
}

#[test]
fn raw_draws_have_the_requested_moments() {
    let mut s = IntervalSampler::new(&TraceSpec { duration: 1.0, ..spec(5) }).unwrap();
    let xs: Vec<f64> = (0..200_000).map(|_| s.next_raw()).collect();
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    assert!((m - 1.0).abs() < 0.05, "mean {m}");
    assert!((v - 9.0).abs() < 0.2, "variance {v}");
}

#[test]
fn loss_removes_bursts_within_bounds() {
    let trace = generate_heartbeat_trace(&spec(3)).unwrap();
    let model = BurstLossModel { burst_rate: 0.05, burst_len_min: 2, burst_len_max: 3, seed: 11 };
    let kept = apply_burst_loss(&trace, &model).unwrap();
    assert!(kept.len() < trace.len());
    let mut run = 0;
    for pair in kept.windows(2) {
        let gap = pair[1].seq - pair[0].seq - 1;
        assert!(gap == 0 || (2..=3).contains(&gap), "burst of {gap}");
        run += usize::from(gap > 0);
    }
    assert!(run > 0);
    assert_eq!(kept, apply_burst_loss(&trace, &model).unwrap());
}

#[test]
fn a_crash_silences_everything_the_node_sent() {
    let mut events: Vec<SimEvent<u64>> =
        (0..10).map(|i| SimEvent::new(i as f64, EventKind::HeartbeatSend, "a", "b", i)).collect();
    events.push(SimEvent::new(4.5, EventKind::Crash, "a", "a", 0));
    let mut handler = DeliveryHandler::default();
    handler.link_delay.insert(("a".into(), "b".into()), 0.75);
    let log = run_simulation(events, 100.0, &mut handler).unwrap();
    let delivered: Vec<f64> = log.iter().filter(|r| r.kind == "heartbeat-deliver").map(|r| r.time).collect();
    // the heartbeat sent at 4 is still in flight at the crash and is lost
    assert_eq!(delivered, vec![0.75, 1.75, 2.75, 3.75]);
    let mut buf = Vec::new();
    write_log(&mut buf, &log).unwrap();
    assert_eq!(read_log(std::str::from_utf8(&buf).unwrap()).unwrap(), log);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_are_ordered_and_bounded(seed in any::<u64>(), mean in 0.1f64..5.0, variance in 0.0f64..20.0, floor in 0.0f64..0.5) {
        let s = TraceSpec { mean, variance, duration: 300.0, seed, clamp_floor: floor.max(1e-3) };
        let t = generate_heartbeat_trace(&s).unwrap();
        prop_assert_eq!(t[0].time, 0.0);
        for w in t.windows(2) {
            prop_assert_eq!(w[1].seq, w[0].seq + 1);
            prop_assert!(w[1].millis > w[0].millis);
            prop_assert!(w[1].time - w[0].time >= s.clamp_floor - 1e-12);
        }
        prop_assert!(t.last().unwrap().time <= s.duration);
        prop_assert_eq!(t, generate_heartbeat_trace(&s).unwrap());
    }

    #[test]
    fn loss_keeps_an_ordered_subsequence(seed in any::<u64>(), rate in 0.0f64..1.0, lo in 1u32..5, extra in 0u32..5) {
        let trace = generate_heartbeat_trace(&TraceSpec { duration: 200.0, ..spec(seed) }).unwrap();
        let model = BurstLossModel { burst_rate: rate, burst_len_min: lo, burst_len_max: lo + extra, seed };
        let kept = apply_burst_loss(&trace, &model).unwrap();
        prop_assert!(kept.len() <= trace.len());
        prop_assert!(kept.windows(2).all(|w| w[0].seq < w[1].seq));
        prop_assert!(kept.iter().all(|h| trace[h.seq as usize] == *h));
    }
}
