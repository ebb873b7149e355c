//! UWB channel synthesis: noisy DS-TWR timestamps and per-pair phases
//! between two simulated radios.

use hive_core::kinematics::Pose;
use hive_core::localization::{
    ds_twr_distance, fuse_bearings, pair_phase, synthesize_exchange, AntennaArray, BearingEstimate, DeviceClock,
    LocError, PairReading, TwrExchange, SPEED_OF_LIGHT,
};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Reply delay of both sides of a ranging round, on their own clocks.
pub const REPLY_DELAY_PS: f64 = 4.0e9;
pub const CLOCK_RESOLUTION_PS: i64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub dist_bias_m: f64,
    pub dist_sigma_m: f64,
    /// Pointwise spread of each receiver's systematic bearing error curve,
    /// drawn once per run.
    pub angle_offset_sigma_rad: f64,
    pub angle_sigma_rad: f64,
    pub max_range_m: f64,
    /// Clock drifts are drawn uniformly in `±clock_drift_ppm`.
    pub clock_drift_ppm: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            dist_bias_m: 0.105,
            dist_sigma_m: 0.0343,
            angle_offset_sigma_rad: 0.36,
            angle_sigma_rad: 0.0297,
            max_range_m: 9.0,
            clock_drift_ppm: 20.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            dist_bias_m: 0.0,
            dist_sigma_m: 0.0,
            angle_offset_sigma_rad: 0.0,
            angle_sigma_rad: 0.0,
            ..Self::default()
        }
    }
}

/// Static circular obstruction of the radio path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub x_m: f64,
    pub y_m: f64,
    pub radius_m: f64,
}

impl Obstacle {
    /// Length of segment `a`–`b` inside the circle.
    fn chord(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let (fx, fy) = (a.0 - self.x_m, a.1 - self.y_m);
        if len2 == 0.0 {
            return 0.0;
        }
        let bq = 2.0 * (fx * dx + fy * dy);
        let c = fx * fx + fy * fy - self.radius_m * self.radius_m;
        let disc = bq * bq - 4.0 * len2 * c;
        if disc <= 0.0 {
            return 0.0;
        }
        let s = disc.sqrt();
        let t0 = ((-bq - s) / (2.0 * len2)).clamp(0.0, 1.0);
        let t1 = ((-bq + s) / (2.0 * len2)).clamp(0.0, 1.0);
        (t1 - t0) * len2.sqrt()
    }
}

/// 1 in open space, falling linearly with the fraction of an obstacle's
/// diameter the path cuts through; the worst obstacle counts.
pub fn los_quality(a: &Pose, b: &Pose, obstacles: &[Obstacle]) -> f64 {
    obstacles
        .iter()
        .map(|o| 1.0 - (o.chord((a.x_m, a.y_m), (b.x_m, b.y_m)) / (2.0 * o.radius_m)).min(1.0))
        .fold(1.0, f64::min)
}

/// Smooth systematic bearing error of one receiver as a function of the
/// body-frame bearing: a constant plus two harmonics. Every antenna pair
/// sees the same error, so the pairs stay mutually consistent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BearingErrorCurve {
    pub coeffs: [f64; 5],
}

impl BearingErrorCurve {
    /// Each of the three components carries a third of the variance, so
    /// the curve's pointwise standard deviation is `sigma`.
    pub fn sample<R: Rng>(sigma: f64, rng: &mut R) -> Self {
        let part = Normal::new(0.0, sigma / 3f64.sqrt()).expect("sigma validated");
        Self {
            coeffs: [0; 5].map(|_| part.sample(rng)),
        }
    }

    pub fn at(&self, bearing_rad: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + c[1] * bearing_rad.cos()
            + c[2] * bearing_rad.sin()
            + c[3] * (2.0 * bearing_rad).cos()
            + c[4] * (2.0 * bearing_rad).sin()
    }
}

/// Per-device radio impairments, fixed for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radio {
    pub clock: DeviceClock,
    pub bearing_error: BearingErrorCurve,
}

impl Radio {
    pub fn ideal() -> Self {
        Self {
            clock: DeviceClock::new(0, 0.0, CLOCK_RESOLUTION_PS).expect("valid clock"),
            bearing_error: BearingErrorCurve::default(),
        }
    }

    pub fn sample<R: Rng>(noise: &NoiseModel, rng: &mut R) -> Self {
        let drift = if noise.clock_drift_ppm > 0.0 {
            rng.random_range(-noise.clock_drift_ppm..=noise.clock_drift_ppm)
        } else {
            0.0
        };
        let offset = rng.random_range(0..1_000_000_000_000i64);
        let bearing_error = BearingErrorCurve::sample(noise.angle_offset_sigma_rad, rng);
        Self {
            clock: DeviceClock::new(offset, drift, CLOCK_RESOLUTION_PS).expect("drift validated"),
            bearing_error,
        }
    }
}

/// Raw observables of one ranging round, as seen by the responder.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub exchange: TwrExchange,
    pub readings: [PairReading; 3],
    pub true_distance_m: f64,
    /// Body-frame bearing of the initiator from the responder.
    pub true_bearing_rad: f64,
}

impl Measurement {
    pub fn estimate(&self, array: &AntennaArray) -> Result<(f64, BearingEstimate), LocError> {
        let d = ds_twr_distance(&self.exchange, SPEED_OF_LIGHT)?;
        Ok((d, fuse_bearings(&self.readings, array)))
    }
}

pub struct Link<'a> {
    pub pose: &'a Pose,
    pub radio: &'a Radio,
}

/// Synthesizes one ranging round started at true time `start_ps`. `None`
/// when the agents are out of range.
#[allow(clippy::too_many_arguments)]
pub fn channel_measure<R: Rng>(
    initiator: Link<'_>,
    responder: Link<'_>,
    array: &AntennaArray,
    noise: &NoiseModel,
    obstacles: &[Obstacle],
    start_ps: f64,
    rng: &mut R,
) -> Option<Measurement> {
    let true_distance_m = initiator.pose.distance_to(responder.pose);
    if true_distance_m > noise.max_range_m {
        return None;
    }
    let dist_noise = Normal::new(noise.dist_bias_m, noise.dist_sigma_m).expect("sigma validated");
    let angle_noise = Normal::new(0.0, noise.angle_sigma_rad).expect("sigma validated");
    let observed = (true_distance_m + dist_noise.sample(rng)).max(0.0);
    let exchange = synthesize_exchange(
        observed,
        SPEED_OF_LIGHT,
        &initiator.radio.clock,
        &responder.radio.clock,
        start_ps,
        REPLY_DELAY_PS,
    );
    let true_bearing_rad = responder.pose.bearing_to(initiator.pose);
    let los = los_quality(initiator.pose, responder.pose, obstacles);
    let systematic = responder.radio.bearing_error.at(true_bearing_rad);
    let readings = [0u8, 1, 2].map(|k| {
        let perturbed = true_bearing_rad + systematic + angle_noise.sample(rng);
        pair_phase(array, k, perturbed, los)
    });
    Some(Measurement {
        exchange,
        readings,
        true_distance_m,
        true_bearing_rad,
    })
}
