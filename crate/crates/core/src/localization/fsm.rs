use crate::AgentId;

/// Synchronisation and ranging state of one agent's localization engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocState {
    Unsynced,
    /// A sync-bearing frame was heard; the schedule is applied when the
    /// slot carrying it ends.
    SyncReceive,
    Synchronized,
    /// Owning the current slot and collecting responses to its poll.
    SlotActive,
    /// Answering another agent's poll.
    Ranging,
}

/// Schedule information carried by sync-bearing frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncInfo {
    pub epoch_tick: u64,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Poll,
    Response,
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmEvent {
    SyncFrameReceived(SyncInfo),
    SuperframeStart,
    MySlotStart,
    SlotEnd,
    FrameReceived { kind: FrameKind, from: AgentId },
    Timeout,
}

/// Frames the engine asks the radio to send.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmAction {
    TransmitPoll,
    TransmitResponse { to: AgentId },
    TransmitFinal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocFsmState {
    pub state: LocState,
    pub superframe_epoch: u64,
    /// Present iff the state is past `SyncReceive`.
    pub my_slot: Option<usize>,
    pending: Option<SyncInfo>,
}

impl Default for LocFsmState {
    fn default() -> Self {
        Self::unsynced()
    }
}

impl LocFsmState {
    pub fn unsynced() -> Self {
        Self {
            state: LocState::Unsynced,
            superframe_epoch: 0,
            my_slot: None,
            pending: None,
        }
    }

    /// Starts synchronized as the source of the superframe timing.
    pub fn bootstrap(slot: usize, epoch_tick: u64) -> Self {
        Self {
            state: LocState::Synchronized,
            superframe_epoch: epoch_tick,
            my_slot: Some(slot),
            pending: None,
        }
    }

    pub fn is_synced(&self) -> bool {
        self.my_slot.is_some()
    }

    fn with(self, state: LocState) -> Self {
        Self { state, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsmOutput {
    pub state: LocFsmState,
    pub action: Option<FsmAction>,
    /// The event has no meaning in the current state and was ignored.
    pub ignored: bool,
}

pub fn fsm_step(s: LocFsmState, event: FsmEvent, now_tick: u64) -> FsmOutput {
    use FrameKind::*;
    use FsmEvent::*;
    use LocState::*;

    let out = |state, action| FsmOutput {
        state,
        action,
        ignored: false,
    };
    match (s.state, event) {
        (Unsynced | SyncReceive, SyncFrameReceived(info)) => out(
            LocFsmState {
                state: SyncReceive,
                pending: Some(info),
                ..s
            },
            None,
        ),
        (SyncReceive, SlotEnd) => {
            let info = s.pending.expect("SyncReceive always holds pending sync info");
            out(
                LocFsmState {
                    state: Synchronized,
                    superframe_epoch: info.epoch_tick,
                    my_slot: Some(info.slot),
                    pending: None,
                },
                None,
            )
        }
        (SyncReceive, Timeout) => out(LocFsmState::unsynced(), None),

        (Synchronized, SuperframeStart) => out(
            LocFsmState {
                superframe_epoch: now_tick,
                ..s
            },
            None,
        ),
        (Synchronized, SyncFrameReceived(info)) => out(
            LocFsmState {
                superframe_epoch: info.epoch_tick,
                ..s
            },
            None,
        ),
        (Synchronized, SlotEnd) => out(s, None),
        (Synchronized, MySlotStart) => out(s.with(SlotActive), Some(FsmAction::TransmitPoll)),
        (Synchronized, FrameReceived { kind: Poll, from }) => {
            out(s.with(Ranging), Some(FsmAction::TransmitResponse { to: from }))
        }

        (SlotActive, FrameReceived { kind: Response, .. }) => out(s, None),
        (SlotActive, SlotEnd) => out(s.with(Synchronized), Some(FsmAction::TransmitFinal)),

        (Ranging, FrameReceived { kind: Final, .. }) | (Ranging, SlotEnd) => out(s.with(Synchronized), None),

        (Synchronized | SlotActive | Ranging, Timeout) => out(LocFsmState::unsynced(), None),

        _ => FsmOutput {
            state: s,
            action: None,
            ignored: true,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INFO: SyncInfo = SyncInfo {
        epoch_tick: 100,
        slot: 1,
    };

    #[test]
    fn sync_frame_enters_sync_receive() {
        let o = fsm_step(LocFsmState::unsynced(), FsmEvent::SyncFrameReceived(INFO), 100);
        assert_eq!(o.state.state, LocState::SyncReceive);
        assert_eq!(o.state.my_slot, None);
        let o = fsm_step(o.state, FsmEvent::SlotEnd, 117);
        assert_eq!(o.state.state, LocState::Synchronized);
        assert_eq!(o.state.my_slot, Some(1));
        assert_eq!(o.state.superframe_epoch, 100);
    }

    #[test]
    fn my_slot_transmits_poll() {
        let s = LocFsmState::bootstrap(0, 0);
        let o = fsm_step(s, FsmEvent::MySlotStart, 0);
        assert_eq!(o.state.state, LocState::SlotActive);
        assert_eq!(o.action, Some(FsmAction::TransmitPoll));
        let o = fsm_step(o.state, FsmEvent::SlotEnd, 17);
        assert_eq!(o.state.state, LocState::Synchronized);
        assert_eq!(o.action, Some(FsmAction::TransmitFinal));
    }

    #[test]
    fn responder_path() {
        let s = LocFsmState::bootstrap(1, 0);
        let o = fsm_step(
            s,
            FsmEvent::FrameReceived {
                kind: FrameKind::Poll,
                from: 4,
            },
            3,
        );
        assert_eq!(o.state.state, LocState::Ranging);
        assert_eq!(o.action, Some(FsmAction::TransmitResponse { to: 4 }));
        let o = fsm_step(
            o.state,
            FsmEvent::FrameReceived {
                kind: FrameKind::Final,
                from: 4,
            },
            10,
        );
        assert_eq!(o.state.state, LocState::Synchronized);
    }

    #[test]
    fn timeout_drops_sync_from_every_synced_state() {
        let base = LocFsmState::bootstrap(2, 0);
        for st in [LocState::Synchronized, LocState::SlotActive, LocState::Ranging] {
            let o = fsm_step(base.with(st), FsmEvent::Timeout, 50);
            assert_eq!(o.state, LocFsmState::unsynced());
            assert!(!o.ignored);
        }
    }

    #[test]
    fn unknown_events_are_flagged_noops() {
        let s = LocFsmState::unsynced();
        for ev in [
            FsmEvent::MySlotStart,
            FsmEvent::SlotEnd,
            FsmEvent::SuperframeStart,
            FsmEvent::FrameReceived {
                kind: FrameKind::Poll,
                from: 1,
            },
        ] {
            let o = fsm_step(s, ev, 0);
            assert!(o.ignored);
            assert_eq!(o.state, s);
            assert_eq!(o.action, None);
        }
        let o = fsm_step(
            LocFsmState::bootstrap(0, 0).with(LocState::Ranging),
            FsmEvent::MySlotStart,
            0,
        );
        assert!(o.ignored);
    }
}
