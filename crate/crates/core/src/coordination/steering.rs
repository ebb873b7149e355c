use core::f64::consts::FRAC_PI_2;

use super::NeighborEntry;
use crate::math::wrap_pi;
use crate::AgentId;

/// 20 degrees.
pub const AVOID_MARGIN_RAD: f64 = 0.349_065_850_398_865_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteerParams {
    pub k_attract: f64,
    pub k_repulse: f64,
    pub repulse_radius_m: f64,
    pub heading_gain: f64,
    pub v_max_mps: f64,
    /// Only neighbors in the front half-plane push the robot away.
    pub heading_only_avoidance: bool,
    /// Widens the front half-plane on both sides so that a neighbor just
    /// abeam still counts despite bearing error.
    pub avoid_margin_rad: f64,
}

impl Default for SteerParams {
    fn default() -> Self {
        Self {
            k_attract: 1.0,
            k_repulse: 2.0,
            repulse_radius_m: 1.5,
            heading_gain: 2.0,
            v_max_mps: 0.5,
            heading_only_avoidance: true,
            avoid_margin_rad: AVOID_MARGIN_RAD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteerStatus {
    Following,
    /// The leader is not among the neighbors; the robot stops.
    Holding,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteerCommand {
    pub v_mps: f64,
    pub omega_radps: f64,
    pub status: SteerStatus,
}

impl SteerCommand {
    pub const HOLD: SteerCommand = SteerCommand {
        v_mps: 0.0,
        omega_radps: 0.0,
        status: SteerStatus::Holding,
    };
}

/// Steers along `k_attract · û_goal` minus a linear push
/// `k_repulse · û_j · (R − d_j)/R` from every neighbor closer than `R`.
/// Bearings are body-frame, so the heading error is the bearing of the
/// resulting vector. Speed is the vector length, capped, and projected on
/// the heading.
pub fn steer_towards(goal_bearing_rad: f64, neighbors: &[NeighborEntry], p: &SteerParams) -> SteerCommand {
    steer(goal_bearing_rad, neighbors, None, p)
}

fn steer(goal_bearing_rad: f64, neighbors: &[NeighborEntry], always: Option<AgentId>, p: &SteerParams) -> SteerCommand {
    let mut tx = p.k_attract * libm::cos(goal_bearing_rad);
    let mut ty = p.k_attract * libm::sin(goal_bearing_rad);
    for n in neighbors {
        let rel = wrap_pi(n.bearing_rad);
        if p.heading_only_avoidance && !(libm::fabs(rel) < FRAC_PI_2 + p.avoid_margin_rad) && Some(n.id) != always {
            continue;
        }
        let push = p.k_repulse * libm::fmax(0.0, p.repulse_radius_m - n.distance_m) / p.repulse_radius_m;
        tx -= push * libm::cos(rel);
        ty -= push * libm::sin(rel);
    }
    let error = libm::atan2(ty, tx);
    let magnitude = libm::hypot(tx, ty);
    SteerCommand {
        v_mps: libm::fmin(p.v_max_mps, magnitude) * libm::fmax(0.0, libm::cos(error)),
        omega_radps: p.heading_gain * error,
        status: SteerStatus::Following,
    }
}

/// Follow-the-leader steering from the neighbor snapshot. The leader also
/// pushes back once closer than `R`, from any bearing, which sets the
/// standoff distance and clears the way when the leader comes through.
pub fn steer_follow_leader(neighbors: &[NeighborEntry], leader_id: AgentId, p: &SteerParams) -> SteerCommand {
    match neighbors.iter().find(|n| n.id == leader_id) {
        Some(leader) => steer(leader.bearing_rad, neighbors, Some(leader_id), p),
        None => SteerCommand::HOLD,
    }
}
