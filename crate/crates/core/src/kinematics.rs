//! Unicycle model for differential-drive robots.

use crate::math::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
}

impl Pose {
    pub fn new(x_m: f64, y_m: f64, heading_rad: f64) -> Self {
        Self {
            x_m,
            y_m,
            heading_rad: normalize_angle(heading_rad),
        }
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        libm::hypot(other.x_m - self.x_m, other.y_m - self.y_m)
    }

    /// Direction of `other` relative to this pose's heading, in `[0, 2π)`.
    pub fn bearing_to(&self, other: &Pose) -> f64 {
        let world = libm::atan2(other.y_m - self.y_m, other.x_m - self.x_m);
        normalize_angle(world - self.heading_rad)
    }
}

/// Turns first, then advances `v·dt` along the new heading.
pub fn kinematics_step(pose: &Pose, v_mps: f64, omega_radps: f64, dt_s: f64) -> Pose {
    let heading = normalize_angle(pose.heading_rad + omega_radps * dt_s);
    Pose {
        x_m: pose.x_m + v_mps * dt_s * libm::cos(heading),
        y_m: pose.y_m + v_mps * dt_s * libm::sin(heading),
        heading_rad: heading,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    #[test]
    fn straight_line() {
        let p = kinematics_step(&Pose::default(), 1.0, 0.0, 1.0);
        assert_eq!(p, Pose::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn half_turn_in_place() {
        let p = kinematics_step(&Pose::default(), 0.0, PI, 1.0);
        assert_eq!((p.x_m, p.y_m), (0.0, 0.0));
        assert!((p.heading_rad - PI).abs() < 1e-12);
    }

    #[test]
    fn bearing_is_body_relative() {
        let me = Pose::new(0.0, 0.0, PI / 2.0);
        let b = me.bearing_to(&Pose::new(0.0, 3.0, 0.0));
        assert!(b.abs() < 1e-12);
        let b = me.bearing_to(&Pose::new(1.0, 0.0, 0.0));
        assert!((b - 3.0 * PI / 2.0).abs() < 1e-12);
    }
}
