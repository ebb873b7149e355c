//! End-to-end acceptance checks. Runs as a plain binary so every check
//! prints its PASS/FAIL line; exits non-zero if any check fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hive_core::coordination::{StigEntry, StigTable, StigValue};
use hive_core::localization::{
    ds_twr_distance, refresh_rate, synthesize_exchange, DeviceClock, SlotTiming, SPEED_OF_LIGHT,
};
use hive_core::netlink::{Endpoint, HopQueue, MsgType, NetConfig, Network};
use hivesim::bench::{angle_bench, bandwidth_bench, distance_bench, latency_bench, seed_average};
use hivesim::channel::{NoiseModel, CLOCK_RESOLUTION_PS};
use hivesim::metrics::MetricsRow;
use hivesim::scenario::load_scenario_file;
use hivesim::world::{World, WorldOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    let note = format!("{:.2} s of {} s", took.as_secs_f64(), limit.as_secs());
    match r {
        Ok(d) if took < limit => Ok(format!("{d}; {note}")),
        Ok(d) => Err(format!("{d}; too slow, {note}")),
        Err(d) => Err(format!("{d}; {note}")),
    }
}

fn follow_scenario() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/follow.json")
}

fn twr_zero_noise() -> Check {
    timed(Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let bound = 1e-3 + CLOCK_RESOLUTION_PS as f64 * 1e-12 * SPEED_OF_LIGHT;
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let d = rng.random_range(0.5..=9.0);
            let a = DeviceClock::new(
                rng.random_range(0..1_000_000_000),
                rng.random_range(-20.0..=20.0),
                CLOCK_RESOLUTION_PS,
            )
            .map_err(|e| format!("{e:?}"))?;
            let b = DeviceClock::new(
                rng.random_range(0..1_000_000_000),
                rng.random_range(-20.0..=20.0),
                CLOCK_RESOLUTION_PS,
            )
            .map_err(|e| format!("{e:?}"))?;
            let start = rng.random_range(1e9..1e12);
            let reply = rng.random_range(2e8..5e9);
            let ex = synthesize_exchange(d, SPEED_OF_LIGHT, &a, &b, start, reply);
            let est = ds_twr_distance(&ex, SPEED_OF_LIGHT).map_err(|e| format!("{e:?}"))?;
            worst = worst.max((est - d).abs());
        }
        ensure(
            worst < bound,
            format!("max error {:.3} mm, bound {:.3} mm", worst * 1e3, bound * 1e3),
        )
    })
}

fn distance_sweep() -> Check {
    timed(Duration::from_secs(30), || {
        let r = seed_average(1..=5, |s| distance_bench(s, &NoiseModel::default()));
        let (mean_cm, sigma_cm) = (r.mean_abs_error * 100.0, r.pooled_sigma * 100.0);
        ensure(
            (9.0..=13.0).contains(&mean_cm) && (2.4..=4.4).contains(&sigma_cm),
            format!("mean |error| {mean_cm:.2} cm in [9, 13], pooled sigma {sigma_cm:.2} cm in [2.4, 4.4]"),
        )
    })
}

fn angle_sweep() -> Check {
    let r = seed_average(1..=5, |s| angle_bench(s, &NoiseModel::default()));
    let clean = angle_bench(1, &NoiseModel::noiseless());
    let mut per_step: BTreeMap<u64, f64> = BTreeMap::new();
    for s in &clean.samples {
        let e = per_step.entry((s.truth * 100.0).round() as u64).or_default();
        *e = e.max(s.error.abs());
    }
    let clean_worst = per_step.values().copied().fold(0.0, f64::max);
    ensure(
        (12.0..=22.0).contains(&r.mean_abs_error) && r.max_step_sigma <= 3.0 && clean_worst < 1.0 && per_step.len() == 103,
        format!(
            "mean |error| {:.2} deg in [12, 22], max step sigma {:.2} deg <= 3, noiseless worst {:.4} deg < 1 over {} steps",
            r.mean_abs_error,
            r.max_step_sigma,
            clean_worst,
            per_step.len()
        ),
    )
}

fn refresh_scaling() -> Check {
    let t = SlotTiming::default();
    let rates: Vec<f64> = (2..=32).map(|n| refresh_rate(n, &t)).collect();
    let decreasing = rates.windows(2).all(|w| w[1] < w[0]);
    let (r2, r6) = (rates[0], rates[4]);
    ensure(
        (r2 - 28.0).abs() <= 1.0 && decreasing && r6 < r2 / 2.0,
        format!("refresh(2) = {r2:.3} Hz, refresh(6) = {r6:.3} Hz, strictly decreasing on [2, 32]: {decreasing}"),
    )
}

fn bandwidth_law() -> Check {
    let (size, hz) = (100usize, 10.0);
    let mut notes = Vec::new();
    let mut ok = true;
    for n in [2usize, 3, 5] {
        let r = bandwidth_bench(n, size, hz, 10.0)?;
        let expected = size as f64 * hz * (n * n) as f64;
        let worst = r
            .windows
            .iter()
            .map(|w| (w.measured_bps - expected).abs())
            .fold(0.0, f64::max);
        ok &= worst <= size as f64 && r.dropped == 0 && r.windows.len() >= 9;
        notes.push(format!("N={n}: {expected} B/s, worst window off by {worst} B"));
    }
    ensure(ok, notes.join(", "))
}

fn queue_loss() -> Check {
    // a lone 9 ms hop fed at a constant rate, 1 ms ticks
    let run = |interval: u64| {
        let mut q: HopQueue<u64> = HopQueue::new(16, 9);
        let (mut offered, mut served) = (0u64, 0u64);
        for t in 0..11_000u64 {
            if t < 10_000 && t % interval == 0 {
                q.enqueue(t, t);
                offered += 1;
            }
            served += q.service(t).len() as u64;
        }
        (offered, served, q.dropped_count())
    };
    let (o100, _, d100) = run(10);
    let (o200, _, d200) = run(5);
    let loss200 = d200 as f64 / o200 as f64;
    let path100 = latency_bench(100.0, 10.0)?;
    let path200 = latency_bench(200.0, 10.0)?;
    ensure(
        d100 == 0 && loss200 >= 0.40 && path100.dropped == 0 && path200.loss_fraction >= 0.40,
        format!(
            "hop: 100 Hz lost {d100}/{o100}, 200 Hz lost {loss200:.3}; full path: 100 Hz lost {}, 200 Hz lost {:.3}",
            path100.dropped, path200.loss_fraction
        ),
    )
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

fn subsets<T: Clone>(items: &[T], max: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for it in items {
        let grown: Vec<Vec<T>> = out
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| [s.clone(), vec![it.clone()]].concat())
            .collect();
        out.extend(grown);
    }
    out
}

fn stigmergy_convergence() -> Check {
    let e = |key: &str, v: i64, lamport: u32, origin: u16| StigEntry {
        key: key.into(),
        value: StigValue::Int(v),
        lamport,
        origin,
    };
    let universe = [
        e("a", 1, 1, 1),
        e("a", 2, 1, 2),
        e("a", 3, 2, 1),
        e("b", 4, 1, 3),
        e("a", 5, 2, 3),
        e("b", 6, 3, 1),
        e("a", 7, 2, 1),
    ];
    let mut orders = 0usize;
    for set in subsets(&universe, 4).into_iter().filter(|s| !s.is_empty()) {
        let mut fixed: Option<Vec<StigEntry>> = None;
        for order in permutations(&set) {
            let mut t = StigTable::new(9);
            for u in &order {
                t.merge(u.clone());
            }
            let state: Vec<StigEntry> = t.entries().cloned().collect();
            orders += 1;
            match &fixed {
                None => fixed = Some(state),
                Some(f) if *f != state => return Err(format!("two fixed points for {set:?}")),
                _ => {}
            }
        }
    }

    let ids = [1u16, 2, 3, 4, 5];
    let cfg = NetConfig::default();
    let tick_s = 1e-3;
    let mut net = Network::new(ids, &cfg, tick_s);
    let mut tables: Vec<StigTable> = ids.iter().map(|&id| StigTable::new(id)).collect();
    let period = 100u64;
    let hops = [
        cfg.host_link_s,
        cfg.inter_mcu_s,
        cfg.radio_s,
        cfg.ingress_host_link_s,
        cfg.ingress_inter_mcu_s,
        cfg.ingress_radio_s,
    ];
    let max_path = (hops.iter().sum::<f64>() / tick_s).round() as u64;
    tables[0]
        .put("leader", StigValue::Int(3))
        .map_err(|e| format!("{e:?}"))?;
    tables[4]
        .put("leader", StigValue::Int(4))
        .map_err(|e| format!("{e:?}"))?;
    tables[2]
        .put("speed", StigValue::Real(0.5))
        .map_err(|e| format!("{e:?}"))?;
    let mut converged = None;
    for now in 0..2_000u64 {
        for d in net.advance(now) {
            if d.env.msg_type == MsgType::StigUpdate && d.endpoint == Endpoint::Board {
                let i = ids.iter().position(|&x| x == d.agent).ok_or("unknown agent")?;
                tables[i].apply_update(&d.env.payload).map_err(|e| format!("{e:?}"))?;
            }
        }
        for (i, t) in tables.iter_mut().enumerate() {
            if let Some(env) = t.gossip_tick(now, period) {
                net.submit(now, ids[i], Endpoint::Board, env)
                    .map_err(|e| format!("{e:?}"))?;
            }
        }
        let first: Vec<StigEntry> = tables[0].entries().cloned().collect();
        let same = tables.iter().all(|t| t.entries().cloned().collect::<Vec<_>>() == first);
        if converged.is_none() && same && first.len() == 2 {
            converged = Some(now);
        }
    }
    let bound = 2 * period + max_path;
    let at = converged.ok_or("replicas never agreed")?;
    ensure(
        at <= bound,
        format!("{orders} merge orders agree; N=5 converged at {at} ms, bound {bound} ms"),
    )
}

struct FollowRun {
    rows: Vec<MetricsRow>,
    final_leader: Option<u16>,
    took: Duration,
}

fn run_follow() -> Result<FollowRun, String> {
    let s = load_scenario_file(&follow_scenario()).map_err(|e| e.to_string())?;
    if !s.steer.heading_only_avoidance {
        return Err("scenario must use heading-direction avoidance".into());
    }
    let start = Instant::now();
    let mut w = World::new(&s, WorldOptions { interactive: false }).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    w.run_until(w.end_tick(), |r| rows.push(r.clone()), |_| {});
    Ok(FollowRun {
        rows,
        final_leader: w.leader_of(1),
        took: start.elapsed(),
    })
}

fn follow_the_leader() -> Check {
    let a = run_follow()?;
    let b = run_follow()?;
    let last = a.rows.last().ok_or("no metrics")?;
    let far = |r: &MetricsRow, leader: u16| {
        r.agents
            .iter()
            .filter(|m| m.id != leader)
            .map(|m| m.leader_distance_m.unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    };
    let new_leader = a.final_leader.ok_or("no leader at the end")?;
    let tail = a
        .rows
        .iter()
        .filter(|r| r.time_s > 900.0 - 1e-9)
        .map(|r| far(r, new_leader))
        .fold(0.0, f64::max);
    let after: Vec<&MetricsRow> = a.rows.iter().filter(|r| r.time_s > 500.0).collect();
    // first time after the switch from which every follower stays within 2 m
    let settled = after
        .iter()
        .enumerate()
        .find(|(i, _)| after[*i..].iter().all(|r| far(r, new_leader) <= 2.0))
        .map(|(_, r)| r.time_s - 500.0);
    let took = a.took.max(b.took);
    let detail = format!(
        "leader {new_leader} after switch, final-100 s max distance {tail:.2} m <= 2, collisions {}, reconverged after {}, identical reruns {}, {:.2} s of 60 s",
        last.collisions,
        settled.map(|s| format!("{s:.0} s <= 120 s")).unwrap_or_else(|| "never".into()),
        a.rows == b.rows,
        took.as_secs_f64()
    );
    ensure(
        new_leader == 2
            && tail <= 2.0
            && last.collisions == 0
            && settled.is_some_and(|s| s <= 120.0)
            && a.rows == b.rows
            && took < Duration::from_secs(60)
            && (last.time_s - 1000.0).abs() < 1e-9,
        detail,
    )
}

fn byte_identical_metrics() -> Check {
    let dir = std::env::temp_dir().join(format!("hivesim-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let scenario = follow_scenario();
    let mut outputs = Vec::new();
    for name in ["first.csv", "second.csv"] {
        let path = dir.join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_hivesim"))
            .args(["run", "--seed", "11", "--scenario"])
            .arg(&scenario)
            .arg("--metrics")
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    ensure(
        outputs[0] == outputs[1] && !outputs[0].is_empty(),
        format!(
            "two runs with seed 11: {} and {} bytes, identical {}",
            outputs[0].len(),
            outputs[1].len(),
            outputs[0] == outputs[1]
        ),
    )
}

fn main() -> ExitCode {
    let checks: [Criterion; 9] = [
        ("ranging exactness, zero noise", twr_zero_noise),
        ("distance sweep error", distance_sweep),
        ("angle sweep error", angle_sweep),
        ("refresh rate scaling", refresh_scaling),
        ("gossip bandwidth law", bandwidth_law),
        ("9 ms hop loss", queue_loss),
        ("stigmergy convergence", stigmergy_convergence),
        ("follow the leader", follow_the_leader),
        ("byte-identical reruns", byte_identical_metrics),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        match check() {
            Ok(d) => println!("criterion {}: PASS  {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
