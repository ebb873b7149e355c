//! Benchmark experiments: ranging and bearing error sweeps, the refresh
//! model, gossip bandwidth and queue loss.

use std::f64::consts::PI;
use std::io::{self, Write};

use hive_core::coordination::{StigTable, StigValue};
use hive_core::kinematics::Pose;
use hive_core::localization::{refresh_rate, AntennaArray, SlotTiming};
use hive_core::math::{normalize_angle, wrap_pi};
use hive_core::netlink::{predicted_bandwidth, BandwidthModel, Endpoint, Envelope, MsgType, NetConfig, Network};
use hive_core::AgentId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{channel_measure, Link, NoiseModel, Radio};

/// One `truth,measured,error` line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub truth: f64,
    pub measured: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub samples: Vec<Sample>,
    pub mean_abs_error: f64,
    /// Square root of the mean per-step variance.
    pub pooled_sigma: f64,
    pub max_step_sigma: f64,
}

fn summarize(samples: Vec<Sample>, per_step: usize) -> SweepResult {
    let mean_abs_error = samples.iter().map(|s| s.error.abs()).sum::<f64>() / samples.len() as f64;
    let variances: Vec<f64> = samples
        .chunks(per_step)
        .map(|c| {
            let m = c.iter().map(|s| s.error).sum::<f64>() / c.len() as f64;
            c.iter().map(|s| (s.error - m).powi(2)).sum::<f64>() / (c.len() as f64 - 1.0).max(1.0)
        })
        .collect();
    let pooled_sigma = (variances.iter().sum::<f64>() / variances.len() as f64).sqrt();
    let max_step_sigma = variances.iter().copied().fold(0.0, f64::max).sqrt();
    SweepResult {
        samples,
        mean_abs_error,
        pooled_sigma,
        max_step_sigma,
    }
}

pub const DISTANCE_STEP_M: f64 = 0.5;
pub const DISTANCE_MIN_M: f64 = 0.5;
pub const DISTANCE_MAX_M: f64 = 9.0;
pub const DISTANCE_SAMPLES: usize = 200;

/// Two radios facing each other at 0.5 m steps out to 9 m. Errors in
/// meters.
pub fn distance_bench(seed: u64, noise: &NoiseModel) -> SweepResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Radio::sample(noise, &mut rng);
    let b = Radio::sample(noise, &mut rng);
    let array = AntennaArray::default();
    let steps = ((DISTANCE_MAX_M - DISTANCE_MIN_M) / DISTANCE_STEP_M).round() as usize + 1;
    let initiator = Pose::new(0.0, 0.0, 0.0);
    let mut samples = Vec::with_capacity(steps * DISTANCE_SAMPLES);
    let mut t_ps = 0.0;
    for k in 0..steps {
        let d = DISTANCE_MIN_M + k as f64 * DISTANCE_STEP_M;
        let responder = Pose::new(d, 0.0, PI);
        for _ in 0..DISTANCE_SAMPLES {
            t_ps += 1.0e10;
            let m = channel_measure(
                Link {
                    pose: &initiator,
                    radio: &a,
                },
                Link {
                    pose: &responder,
                    radio: &b,
                },
                &array,
                noise,
                &[],
                t_ps,
                &mut rng,
            )
            .expect("bench distances are in range");
            let (measured, _) = m.estimate(&array).expect("synthesized exchanges are ordered");
            samples.push(Sample {
                truth: d,
                measured,
                error: measured - d,
            });
        }
    }
    summarize(samples, DISTANCE_SAMPLES)
}

pub const ANGLE_STEP_DEG: f64 = 3.51;
pub const ANGLE_SAMPLES: usize = 100;
pub const ANGLE_EMITTER_M: f64 = 2.5;

/// A receiver turned in 3.51° steps through a full circle with an emitter
/// 2.5 m away. Angles in degrees.
pub fn angle_bench(seed: u64, noise: &NoiseModel) -> SweepResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let emitter_radio = Radio::sample(noise, &mut rng);
    let receiver_radio = Radio::sample(noise, &mut rng);
    let array = AntennaArray::default();
    let emitter = Pose::new(ANGLE_EMITTER_M, 0.0, PI);
    let steps = (360.0 / ANGLE_STEP_DEG).ceil() as usize;
    let mut samples = Vec::with_capacity(steps * ANGLE_SAMPLES);
    let mut t_ps = 0.0;
    for k in 0..steps {
        let truth = (k as f64 * ANGLE_STEP_DEG).to_radians();
        let receiver = Pose::new(0.0, 0.0, normalize_angle(-truth));
        for _ in 0..ANGLE_SAMPLES {
            t_ps += 1.0e10;
            let m = channel_measure(
                Link {
                    pose: &emitter,
                    radio: &emitter_radio,
                },
                Link {
                    pose: &receiver,
                    radio: &receiver_radio,
                },
                &array,
                noise,
                &[],
                t_ps,
                &mut rng,
            )
            .expect("emitter is in range");
            let (_, est) = m.estimate(&array).expect("synthesized exchanges are ordered");
            samples.push(Sample {
                truth: truth.to_degrees(),
                measured: est.bearing_rad.to_degrees(),
                error: wrap_pi(est.bearing_rad - truth).to_degrees(),
            });
        }
    }
    summarize(samples, ANGLE_SAMPLES)
}

/// Statistics of several seeds averaged, plus the samples of all of them.
pub fn seed_average(seeds: impl IntoIterator<Item = u64>, run: impl Fn(u64) -> SweepResult) -> SweepResult {
    let results: Vec<SweepResult> = seeds.into_iter().map(run).collect();
    let n = results.len() as f64;
    SweepResult {
        mean_abs_error: results.iter().map(|r| r.mean_abs_error).sum::<f64>() / n,
        pooled_sigma: results.iter().map(|r| r.pooled_sigma).sum::<f64>() / n,
        max_step_sigma: results.iter().map(|r| r.max_step_sigma).fold(0.0, f64::max),
        samples: results.into_iter().flat_map(|r| r.samples).collect(),
    }
}

pub fn write_samples(out: &mut impl Write, samples: &[Sample]) -> io::Result<()> {
    writeln!(out, "truth,measured,error")?;
    for s in samples {
        writeln!(out, "{:.6},{:.6},{:.6}", s.truth, s.measured, s.error)?;
    }
    Ok(())
}

pub fn refresh_table(max_slots: usize, timing: &SlotTiming) -> Vec<(usize, f64)> {
    (2..=max_slots).map(|n| (n, refresh_rate(n, timing))).collect()
}

pub fn write_refresh(out: &mut impl Write, rows: &[(usize, f64)]) -> io::Result<()> {
    writeln!(out, "n_slots,hz")?;
    for (n, hz) in rows {
        writeln!(out, "{n},{hz:.6}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthWindow {
    pub start_s: f64,
    pub measured_bps: f64,
    pub predicted_bps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthResult {
    pub frame_bytes: usize,
    pub windows: Vec<BandwidthWindow>,
    pub dropped: u64,
}

/// Frame overhead of a one-record update with an `key_len`-byte key and a
/// byte-string value: header, count, key, tag, value length, version.
const fn update_overhead(key_len: usize) -> usize {
    7 + 2 + 1 + key_len + 1 + 2 + 4 + 2
}

const BANDWIDTH_KEY_LEN: usize = 6;
pub const MIN_FRAME_BYTES: usize = update_overhead(BANDWIDTH_KEY_LEN);

/// Every agent rewrites one entry of constant encoded size each period
/// and gossips it to the full mesh. Counts radio bytes per 1 s window.
pub fn bandwidth_bench(n: usize, frame_bytes: usize, hz: f64, duration_s: f64) -> Result<BandwidthResult, String> {
    if frame_bytes < MIN_FRAME_BYTES {
        return Err(format!("frame size must be at least {MIN_FRAME_BYTES} bytes"));
    }
    if !(hz > 0.0 && hz <= 1000.0) {
        return Err("frequency must be in (0, 1000] Hz".into());
    }
    if n == 0 || n > 1000 {
        return Err("agent count must be in [1, 1000]".into());
    }
    let tick_s = 1e-3;
    let period = (1.0 / hz / tick_s).round().max(1.0) as u64;
    let ids: Vec<AgentId> = (1..=n as AgentId).collect();
    let mut net = Network::new(ids.iter().copied(), &NetConfig::default(), tick_s);
    let mut tables: Vec<StigTable> = ids.iter().map(|&id| StigTable::new(id)).collect();
    let value_len = frame_bytes - MIN_FRAME_BYTES;
    let window = (1.0 / tick_s) as u64;
    let total = (duration_s / tick_s).round() as u64;
    let model = BandwidthModel {
        size_bytes: frame_bytes,
        frequency_hz: 1.0 / (period as f64 * tick_s),
        n_agents: n,
    };
    let predicted_bps = predicted_bandwidth(&model);
    let mut windows = Vec::new();
    let mut window_start = 0;
    for t in 0..total {
        if t > 0 && t % window == 0 {
            let bytes = net.stats().radio_bytes;
            windows.push(BandwidthWindow {
                start_s: (t - window) as f64 * tick_s,
                measured_bps: (bytes - window_start) as f64 / (window as f64 * tick_s),
                predicted_bps,
            });
            window_start = bytes;
        }
        for d in net.advance(t) {
            let _ = tables[(d.agent - 1) as usize].apply_update(&d.env.payload);
        }
        for (i, table) in tables.iter_mut().enumerate() {
            if t % period == 0 {
                let mut v = vec![0u8; value_len];
                if let Some(first) = v.first_mut() {
                    *first = (t / period) as u8;
                }
                let key = format!("b{:05}", ids[i]);
                table.put(&key, StigValue::Bytes(v)).map_err(|e| e.to_string())?;
            }
            if let Some(env) = table.gossip_tick(t, period) {
                debug_assert_eq!(env.encoded_len(), frame_bytes);
                let _ = net.submit(t, ids[i], Endpoint::Board, env);
            }
        }
    }
    Ok(BandwidthResult {
        frame_bytes,
        windows,
        dropped: net.stats().dropped,
    })
}

pub fn write_bandwidth(out: &mut impl Write, r: &BandwidthResult) -> io::Result<()> {
    writeln!(out, "window_start_s,measured_bps,predicted_bps")?;
    for w in &r.windows {
        writeln!(out, "{:.3},{:.3},{:.3}", w.start_s, w.measured_bps, w.predicted_bps)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatencyResult {
    pub rate_hz: f64,
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub loss_fraction: f64,
    pub mean_latency_ms: f64,
    pub max_latency_ms: f64,
}

/// Host-to-host unicasts between two agents at a constant offered rate.
pub fn latency_bench(rate_hz: f64, duration_s: f64) -> Result<LatencyResult, String> {
    if !(rate_hz > 0.0 && rate_hz <= 1000.0) {
        return Err("rate must be in (0, 1000] Hz".into());
    }
    let tick_s = 1e-3;
    let mut net = Network::new([1, 2], &NetConfig::default(), tick_s);
    let total = (duration_s / tick_s).round() as u64;
    let mut offered = 0u64;
    let mut latencies = Vec::new();
    let mut t = 0;
    loop {
        let sending = t < total;
        while sending && (offered as f64 / rate_hz) / tick_s <= t as f64 {
            let env = Envelope::new(1, 2, MsgType::UserBroadcast, (offered as u32).to_le_bytes().to_vec())
                .expect("small payload");
            let _ = net.submit(t, 1, Endpoint::Host, env);
            offered += 1;
        }
        for d in net.advance(t) {
            latencies.push((d.delivered_at - d.sent_at) as f64 * tick_s * 1e3);
        }
        if !sending && net.is_idle() {
            break;
        }
        t += 1;
    }
    let stats = net.stats();
    let delivered = latencies.len() as u64;
    Ok(LatencyResult {
        rate_hz,
        offered,
        delivered,
        dropped: stats.dropped,
        loss_fraction: stats.dropped as f64 / offered.max(1) as f64,
        mean_latency_ms: latencies.iter().sum::<f64>() / delivered.max(1) as f64,
        max_latency_ms: latencies.iter().copied().fold(0.0, f64::max),
    })
}

pub fn write_latency(out: &mut impl Write, rows: &[LatencyResult]) -> io::Result<()> {
    writeln!(
        out,
        "rate_hz,offered,delivered,dropped,loss_fraction,mean_latency_ms,max_latency_ms"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:.3},{},{},{},{:.6},{:.3},{:.3}",
            r.rate_hz, r.offered, r.delivered, r.dropped, r.loss_fraction, r.mean_latency_ms, r.max_latency_ms
        )?;
    }
    Ok(())
}
