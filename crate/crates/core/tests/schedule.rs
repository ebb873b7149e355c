use hive_core::localization::{build_schedule, refresh_rate, SlotTiming};

fn oracle_refresh(n: usize) -> f64 {
    // poll + (n - 1) responses + final, 4 ms each, plus processing
    let slot = 0.004 + (n as f64 - 1.0) * 0.004 + 0.004 + (1.0 / 56.0 - 0.012);
    1.0 / (n as f64 * slot)
}

#[test]
fn two_agents_refresh_at_28_hz() {
    let t = SlotTiming::default();
    assert!((refresh_rate(2, &t) - 28.0).abs() < 1e-9);
}

#[test]
fn refresh_matches_oracle_and_decreases() {
    let t = SlotTiming::default();
    let mut prev = f64::INFINITY;
    for n in 2..=64 {
        let r = refresh_rate(n, &t);
        assert!((r - oracle_refresh(n)).abs() < 1e-9 * r);
        assert!(r < prev, "n={n}");
        prev = r;
    }
    assert!(refresh_rate(6, &t) < refresh_rate(2, &t) / 2.0);
}

#[test]
fn slots_are_disjoint_and_cover_the_superframe() {
    let ids: Vec<u16> = (1..=10).rev().collect();
    let s = build_schedule(&ids, 10, SlotTiming::default()).unwrap();
    let mut intervals: Vec<(f64, f64)> = (0..10).map(|k| s.slot_interval(k)).collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    assert_eq!(intervals[0].0, 0.0);
    for w in intervals.windows(2) {
        assert!((w[0].1 - w[1].0).abs() < 1e-12);
    }
    assert!((intervals[9].1 - s.superframe_duration()).abs() < 1e-12);
    let mut owners: Vec<u16> = (0..10).map(|k| s.owner_of(k).unwrap()).collect();
    owners.sort();
    assert_eq!(owners, (1..=10).collect::<Vec<_>>());
}
