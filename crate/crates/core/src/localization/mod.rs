//! UWB relative localization: double-sided two-way ranging, the TDMA slot
//! schedule and its synchronisation state machine, and bearing estimation
//! from the phase differences of a three-antenna array.

mod aoa;
mod fsm;
mod schedule;
mod twr;

pub use aoa::{
    fuse_bearings, pair_bearing, pair_phase, pair_weight, AntennaArray, BearingCandidate, BearingEstimate, PairBearing,
    PairReading, CLUSTER_TOLERANCE_RAD, CONFIDENT_HALF_WIDTH_RAD, LOW_CONFIDENCE_CAP, MIN_LOS_WEIGHT, OFF_AXIS_WEIGHT,
};
pub use fsm::{fsm_step, FrameKind, FsmAction, FsmEvent, FsmOutput, LocFsmState, LocState, SyncInfo};
pub use schedule::{build_schedule, refresh_rate, SlotSchedule, SlotTiming};
pub use twr::{ds_twr_distance, synthesize_exchange, DeviceClock, TwrExchange, SPEED_OF_LIGHT};

use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum LocError {
    /// Timestamps of a ranging exchange are not strictly ordered on one of
    /// the two clocks.
    InvalidExchange,
    InvalidClock,
    InvalidArray,
    InvalidTiming,
    /// More agents than the compile-time slot count.
    ScheduleFull {
        agents: usize,
        slots: usize,
    },
    DuplicateAgent(crate::AgentId),
}

impl fmt::Display for LocError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LocError::InvalidExchange => f.write_str("ranging timestamps are not monotonic"),
            LocError::InvalidClock => f.write_str("clock drift or resolution out of range"),
            LocError::InvalidArray => f.write_str("antenna array geometry is invalid"),
            LocError::InvalidTiming => f.write_str("slot timing must be positive with at least 2 slots"),
            LocError::ScheduleFull { agents, slots } => {
                write!(f, "{agents} agents do not fit in {slots} slots")
            }
            LocError::DuplicateAgent(id) => write!(f, "agent id {id} appears twice"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LocError {}
