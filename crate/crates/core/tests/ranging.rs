use hive_core::localization::{ds_twr_distance, synthesize_exchange, DeviceClock, TwrExchange, SPEED_OF_LIGHT};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent forward model: true event times from geometry and the
/// responder/initiator turnaround counted on their own clocks, then each
/// stamp latched as floor(local / quantum) * quantum.
fn oracle_exchange(
    distance_m: f64,
    ppm_a: f64,
    ppm_b: f64,
    offset_a: i64,
    offset_b: i64,
    quantum: i64,
    reply_s: f64,
) -> TwrExchange {
    let tof = distance_m / 299_792_458.0;
    let ka = 1.0 + ppm_a / 1e6;
    let kb = 1.0 + ppm_b / 1e6;
    let t = [
        1e-3,
        1e-3 + tof,
        1e-3 + tof + reply_s / kb,
        1e-3 + 2.0 * tof + reply_s / kb,
        1e-3 + 2.0 * tof + reply_s / kb + reply_s / ka,
        1e-3 + 3.0 * tof + reply_s / kb + reply_s / ka,
    ];
    let latch = |k: f64, off: i64, sec: f64| {
        let local = off as f64 + sec * 1e12 * k;
        (local / quantum as f64).floor() as i64 * quantum
    };
    TwrExchange {
        t_poll_tx: latch(ka, offset_a, t[0]),
        t_poll_rx: latch(kb, offset_b, t[1]),
        t_resp_tx: latch(kb, offset_b, t[2]),
        t_resp_rx: latch(ka, offset_a, t[3]),
        t_final_tx: latch(ka, offset_a, t[4]),
        t_final_rx: latch(kb, offset_b, t[5]),
    }
}

fn quantum_m(q: i64) -> f64 {
    q as f64 * 1e-12 * SPEED_OF_LIGHT
}

#[test]
fn three_meters_no_drift() {
    let ex = oracle_exchange(3.0, 0.0, 0.0, 0, 0, 16, 300e-6);
    let d = ds_twr_distance(&ex, SPEED_OF_LIGHT).unwrap();
    assert!((d - 3.0).abs() < 0.005, "{d}");
}

#[test]
fn synthesizer_agrees_with_oracle() {
    let a = DeviceClock::new(123_456, 12.0, 16).unwrap();
    let b = DeviceClock::new(9_876_543, -7.5, 16).unwrap();
    let ours = synthesize_exchange(4.2, SPEED_OF_LIGHT, &a, &b, 1e9, 300e6);
    let theirs = oracle_exchange(4.2, 12.0, -7.5, 123_456, 9_876_543, 16, 300e-6);
    let fields = |e: &TwrExchange| {
        [
            e.t_poll_tx,
            e.t_poll_rx,
            e.t_resp_tx,
            e.t_resp_rx,
            e.t_final_tx,
            e.t_final_rx,
        ]
    };
    for (x, y) in fields(&ours).iter().zip(fields(&theirs)) {
        assert!((x - y).abs() <= 16, "{x} vs {y}");
    }
}

#[test]
fn thousand_random_exchanges_cancel_drift() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7717);
    let tol = 1e-3 + quantum_m(16);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(0.5..9.0);
        let a = DeviceClock::new(rng.random_range(0..1_000_000_000), rng.random_range(-20.0..20.0), 16).unwrap();
        let b = DeviceClock::new(rng.random_range(0..1_000_000_000), rng.random_range(-20.0..20.0), 16).unwrap();
        let ex = synthesize_exchange(d, SPEED_OF_LIGHT, &a, &b, rng.random_range(0.0..1e12), 300e6);
        let m = ds_twr_distance(&ex, SPEED_OF_LIGHT).unwrap();
        worst = worst.max((m - d).abs());
    }
    assert!(worst < tol, "worst {worst} m");
}

#[test]
fn equal_round_and_reply_is_zero() {
    let ex = oracle_exchange(0.0, 0.0, 0.0, 0, 0, 1, 200e-6);
    assert_eq!(ds_twr_distance(&ex, SPEED_OF_LIGHT).unwrap(), 0.0);
}

proptest! {
    #[test]
    fn drift_within_50ppm_cancels(
        d in 0.1f64..20.0,
        ppm_a in -50.0f64..50.0,
        ppm_b in -50.0f64..50.0,
        reply_us in 150.0f64..1500.0,
    ) {
        let ex = oracle_exchange(d, ppm_a, ppm_b, 0, 0, 16, reply_us * 1e-6);
        let m = ds_twr_distance(&ex, SPEED_OF_LIGHT).unwrap();
        prop_assert!((m - d).abs() < 1e-3 + quantum_m(16), "d={} m={}", d, m);
    }
}
