//! Small angle helpers on top of `libm`.

use core::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = libm::fmod(a, TAU);
    let r = if r < 0.0 { r + TAU } else { r };
    // fmod of a tiny negative value can round up to exactly TAU
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = normalize_angle(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Smallest absolute angular distance between two angles, in `[0, π]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    libm::fabs(wrap_pi(a - b))
}

pub fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

pub fn rad(deg: f64) -> f64 {
    deg.to_radians()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps() {
        assert!((normalize_angle(-0.5) - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(normalize_angle(TAU), 0.0);
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_pi(PI), PI);
        assert!((circular_distance(rad(359.0), rad(1.0)) - rad(2.0)).abs() < 1e-12);
    }
}
