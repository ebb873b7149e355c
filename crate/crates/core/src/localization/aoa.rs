use core::f64::consts::{PI, TAU};

use super::LocError;
use crate::math::{circular_distance, normalize_angle, wrap_pi};

/// Half width of the band around broadside where a pair is trusted.
pub const CONFIDENT_HALF_WIDTH_RAD: f64 = PI / 6.0;
/// Angle weight applied outside the trusted band.
pub const OFF_AXIS_WEIGHT: f64 = 0.25;
/// Floor on the LOS factor so that no weight reaches zero.
pub const MIN_LOS_WEIGHT: f64 = 0.05;
/// Candidates closer than this to the best candidate form its cluster.
pub const CLUSTER_TOLERANCE_RAD: f64 = 25.0 * PI / 180.0;
/// Ceiling on the confidence reported when every pair saturated.
pub const LOW_CONFIDENCE_CAP: f64 = 0.2;

/// Three antennas on an equilateral triangle, giving three pairs. Each pair
/// is described by the direction of its broadside normal in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaArray {
    pub spacing_m: f64,
    pub wavelength_m: f64,
    pub pair_orientations_rad: [f64; 3],
}

impl Default for AntennaArray {
    fn default() -> Self {
        Self {
            spacing_m: 0.027,
            // channel 2 carrier, 3.9936 GHz
            wavelength_m: 0.0749,
            pair_orientations_rad: [0.0, TAU / 3.0, 2.0 * TAU / 3.0],
        }
    }
}

impl AntennaArray {
    pub fn new(spacing_m: f64, wavelength_m: f64, pair_orientations_rad: [f64; 3]) -> Result<Self, LocError> {
        let array = Self {
            spacing_m,
            wavelength_m,
            pair_orientations_rad,
        };
        array.validate()?;
        Ok(array)
    }

    /// Checks `0 < d/λ < 0.5` (no phase wrap inside ±90°) and that the
    /// three orientations are distinct.
    pub fn validate(&self) -> Result<(), LocError> {
        let ratio = self.spacing_over_wavelength();
        if !(self.spacing_m > 0.0 && self.wavelength_m > 0.0 && ratio < 0.5) {
            return Err(LocError::InvalidArray);
        }
        let o = &self.pair_orientations_rad;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if !(circular_distance(o[i], o[j]) > 1e-9) {
                return Err(LocError::InvalidArray);
            }
        }
        Ok(())
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        self.spacing_m / self.wavelength_m
    }
}

/// Phase difference measured across one antenna pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairReading {
    pub pair_index: u8,
    pub phase_diff_rad: f64,
    pub los_quality: f64,
}

/// The two body-frame-local angles a single pair cannot tell apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairBearing {
    pub angle_local_rad: f64,
    pub mirror_local_rad: f64,
    /// The arcsine argument fell outside [-1, 1] and was clamped.
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BearingCandidate {
    pub pair_index: u8,
    pub angle_rad: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingEstimate {
    pub bearing_rad: f64,
    pub confidence: f64,
    pub low_confidence: bool,
    /// Two candidates per pair, in pair order (direct, then mirror).
    pub candidates: [BearingCandidate; 6],
}

/// Channel-side synthesis of the phase difference seen by `pair_index` for
/// a plane wave arriving from body-frame bearing `bearing_true_rad`.
pub fn pair_phase(array: &AntennaArray, pair_index: u8, bearing_true_rad: f64, los_quality: f64) -> PairReading {
    let orientation = array.pair_orientations_rad[usize::from(pair_index)];
    let phase = TAU * array.spacing_over_wavelength() * libm::sin(bearing_true_rad - orientation);
    PairReading {
        pair_index,
        phase_diff_rad: wrap_pi(phase),
        los_quality,
    }
}

/// Inverts a pair's phase difference to `asin(Δφ·λ / (2π·d))` and its
/// front/back mirror `π − angle`.
pub fn pair_bearing(reading: &PairReading, array: &AntennaArray) -> PairBearing {
    let x = reading.phase_diff_rad / (TAU * array.spacing_over_wavelength());
    let saturated = !(libm::fabs(x) <= 1.0);
    let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let angle = libm::asin(x);
    PairBearing {
        angle_local_rad: angle,
        mirror_local_rad: PI - angle,
        saturated,
    }
}

/// Certainty of one pair's measurement: full weight inside ±30° of
/// broadside (and so inside the mirrored 150°..210° band), a quarter outside,
/// scaled by the line-of-sight quality.
pub fn pair_weight(angle_local_rad: f64, los_quality: f64) -> f64 {
    let angle_w = if libm::fabs(angle_local_rad) <= CONFIDENT_HALF_WIDTH_RAD + 1e-12 {
        1.0
    } else {
        OFF_AXIS_WEIGHT
    };
    angle_w * libm::fmax(los_quality.clamp(0.0, 1.0), MIN_LOS_WEIGHT)
}

/// Resolves the mirror ambiguity of three pairs and fuses them into one
/// body-frame bearing.
///
/// Every candidate is scored by the total weight of the pairs that have a
/// candidate within [`CLUSTER_TOLERANCE_RAD`] of it. The best-scoring
/// cluster is averaged on the circle, weighted; confidence is the cluster's
/// share of the total weight (each pair counted once).
pub fn fuse_bearings(readings: &[PairReading; 3], array: &AntennaArray) -> BearingEstimate {
    let mut candidates = [BearingCandidate::default(); 6];
    let mut all_saturated = true;
    for (i, r) in readings.iter().enumerate() {
        let pb = pair_bearing(r, array);
        all_saturated &= pb.saturated;
        let orientation = array.pair_orientations_rad[usize::from(r.pair_index)];
        let weight = pair_weight(pb.angle_local_rad, r.los_quality);
        candidates[2 * i] = BearingCandidate {
            pair_index: r.pair_index,
            angle_rad: normalize_angle(orientation + pb.angle_local_rad),
            weight,
        };
        candidates[2 * i + 1] = BearingCandidate {
            pair_index: r.pair_index,
            angle_rad: normalize_angle(orientation + pb.mirror_local_rad),
            weight,
        };
    }

    // Each pair votes once, with whichever of its two candidates is nearest.
    let members = |center: f64| -> [Option<usize>; 3] {
        core::array::from_fn(|k| {
            let (a, b) = (2 * k, 2 * k + 1);
            let da = circular_distance(candidates[a].angle_rad, center);
            let db = circular_distance(candidates[b].angle_rad, center);
            let (i, d) = if db < da { (b, db) } else { (a, da) };
            (d <= CLUSTER_TOLERANCE_RAD).then_some(i)
        })
    };
    let weight_of = |m: &[Option<usize>; 3]| -> f64 { m.iter().flatten().map(|&i| candidates[i].weight).sum() };
    let mean_of = |m: &[Option<usize>; 3]| -> f64 {
        let (mut sx, mut sy) = (0.0, 0.0);
        for &i in m.iter().flatten() {
            sx += candidates[i].weight * libm::cos(candidates[i].angle_rad);
            sy += candidates[i].weight * libm::sin(candidates[i].angle_rad);
        }
        normalize_angle(libm::atan2(sy, sx))
    };

    let spread_of = |m: &[Option<usize>; 3]| -> f64 {
        let mean = mean_of(m);
        m.iter()
            .flatten()
            .map(|&i| {
                let d = circular_distance(candidates[i].angle_rad, mean);
                candidates[i].weight * d * d
            })
            .sum()
    };

    // Highest score wins; equal scores go to the tighter cluster.
    let mut cluster = members(candidates[0].angle_rad);
    let mut best = (weight_of(&cluster), spread_of(&cluster));
    for c in &candidates[1..] {
        let m = members(c.angle_rad);
        let key = (weight_of(&m), spread_of(&m));
        let better = key.0 > best.0 + 1e-12 || (libm::fabs(key.0 - best.0) <= 1e-12 && key.1 < best.1 - 1e-15);
        if better {
            cluster = m;
            best = key;
        }
    }
    // re-center: near endfire a pair's two candidates both sit in the
    // cluster and the seed may be the wrong one of them
    let mut bearing = mean_of(&cluster);
    for _ in 0..3 {
        let m = members(bearing);
        if m == cluster || weight_of(&m) < weight_of(&cluster) {
            break;
        }
        cluster = m;
        bearing = mean_of(&cluster);
    }
    let cluster_w = weight_of(&cluster);
    let total_w: f64 = candidates.iter().step_by(2).map(|c| c.weight).sum();
    let mut confidence = (cluster_w / total_w).clamp(0.0, 1.0);
    if all_saturated {
        confidence = libm::fmin(confidence, LOW_CONFIDENCE_CAP);
    }

    BearingEstimate {
        bearing_rad: bearing,
        confidence,
        low_confidence: all_saturated,
        candidates,
    }
}
