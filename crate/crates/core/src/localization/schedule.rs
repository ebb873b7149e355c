use alloc::collections::BTreeMap;

use super::LocError;
use crate::AgentId;

/// Layout of one TDMA slot: the owner's poll, one response sub-slot per
/// other slot in the superframe, the owner's final, then a processing gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTiming {
    pub t_poll_s: f64,
    pub t_resp_s: f64,
    pub t_final_s: f64,
    pub t_proc_s: f64,
}

impl Default for SlotTiming {
    /// Calibrated so a two-slot superframe refreshes at 28 Hz.
    fn default() -> Self {
        Self {
            t_poll_s: 4.0e-3,
            t_resp_s: 4.0e-3,
            t_final_s: 4.0e-3,
            t_proc_s: 1.0 / 56.0 - 12.0e-3,
        }
    }
}

impl SlotTiming {
    pub fn validate(&self) -> Result<(), LocError> {
        let ok = [self.t_poll_s, self.t_resp_s, self.t_final_s]
            .iter()
            .all(|t| *t > 0.0 && t.is_finite())
            && self.t_proc_s >= 0.0
            && self.t_proc_s.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LocError::InvalidTiming)
        }
    }

    pub fn slot_duration(&self, n_slots: usize) -> f64 {
        let responders = n_slots.saturating_sub(1) as f64;
        self.t_poll_s + responders * self.t_resp_s + self.t_final_s + self.t_proc_s
    }

    pub fn superframe_duration(&self, n_slots: usize) -> f64 {
        n_slots as f64 * self.slot_duration(n_slots)
    }
}

/// Fixed slot count with agents assigned by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSchedule {
    pub n_slots: usize,
    pub timing: SlotTiming,
    pub slot_of_agent: BTreeMap<AgentId, usize>,
}

impl SlotSchedule {
    pub fn slot_duration(&self) -> f64 {
        self.timing.slot_duration(self.n_slots)
    }

    pub fn superframe_duration(&self) -> f64 {
        self.timing.superframe_duration(self.n_slots)
    }

    pub fn slot_of(&self, id: AgentId) -> Option<usize> {
        self.slot_of_agent.get(&id).copied()
    }

    pub fn owner_of(&self, slot: usize) -> Option<AgentId> {
        self.slot_of_agent.iter().find(|(_, s)| **s == slot).map(|(id, _)| *id)
    }

    /// `[start, end)` of a slot, in seconds from the superframe start.
    pub fn slot_interval(&self, slot: usize) -> (f64, f64) {
        let d = self.slot_duration();
        (slot as f64 * d, (slot + 1) as f64 * d)
    }
}

/// Assigns each agent the slot equal to its rank in ascending id order.
/// Unused slots stay in the superframe.
pub fn build_schedule(agent_ids: &[AgentId], n_slots: usize, timing: SlotTiming) -> Result<SlotSchedule, LocError> {
    if n_slots < 2 {
        return Err(LocError::InvalidTiming);
    }
    timing.validate()?;
    let mut ids = agent_ids.to_vec();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(LocError::DuplicateAgent(w[0]));
    }
    if ids.len() > n_slots {
        return Err(LocError::ScheduleFull {
            agents: ids.len(),
            slots: n_slots,
        });
    }
    Ok(SlotSchedule {
        n_slots,
        timing,
        slot_of_agent: ids.into_iter().enumerate().map(|(slot, id)| (id, slot)).collect(),
    })
}

/// Localization refresh rate of every agent, `1 / (n · slot_duration(n))`.
pub fn refresh_rate(n_slots: usize, timing: &SlotTiming) -> f64 {
    1.0 / timing.superframe_duration(n_slots)
}
