//! The deterministic world: agents, their radios and stacks, the shared
//! network, and the operator inbox.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::FRAC_PI_2;

use hive_core::coordination::{
    decode_call, decode_manifest, decode_result, encode_manifest, encode_result, steer_follow_leader, steer_towards,
    ActionManifest, ActionResult, ArgValue, LocResult, ManifestRegistry, NeighborEntry, NeighborRegistry, SteerCommand,
    SteerParams, SteerStatus, StigTable, StigValue,
};
use hive_core::kinematics::{kinematics_step, Pose};
use hive_core::localization::{
    build_schedule, fsm_step, AntennaArray, FrameKind, FsmAction, FsmEvent, LocFsmState, LocState, SlotSchedule,
    SyncInfo,
};
use hive_core::math::wrap_pi;
use hive_core::netlink::{decode, Delivery, Endpoint, Envelope, MsgType, Network};
use hive_core::{AgentId, BROADCAST};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{channel_measure, Link, NoiseModel, Obstacle, Radio};
use crate::control::{
    AgentInfo, AgentView, Command, Counters, JsonValue, NeighborView, PoseView, Reply, Request, Snapshot,
};
use crate::metrics::{AgentMetrics, MetricsRow};
use crate::scenario::{manifest_of, ActionDecl, BehaviorKind, BehaviorSpec, Scenario, ScenarioError};

/// Who gets the replies to a command. `SCRIPT` is the scenario's own event
/// list and stdin.
pub type ClientTag = u64;
pub const SCRIPT: ClientTag = 0;

pub const LEADER_KEY: &str = "leader";
const WAYPOINT_REACHED_M: f64 = 0.5;
const GOAL_REACHED_M: f64 = 0.1;
const YIELD_NEAR_M: f64 = 0.5;
const YIELD_FAR_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Outbound {
    pub to: ClientTag,
    pub reply: Reply,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Motion {
    Idle,
    Driving,
    Leading,
    Following,
    Holding,
    Moving,
    Stopped,
}

impl Motion {
    pub fn as_str(self) -> &'static str {
        match self {
            Motion::Idle => "idle",
            Motion::Driving => "driving",
            Motion::Leading => "leading",
            Motion::Following => "following",
            Motion::Holding => "holding",
            Motion::Moving => "moving",
            Motion::Stopped => "stopped",
        }
    }
}

fn loc_state_name(s: LocState) -> &'static str {
    match s {
        LocState::Unsynced => "unsynced",
        LocState::SyncReceive => "sync_receive",
        LocState::Synchronized => "synchronized",
        LocState::SlotActive => "slot_active",
        LocState::Ranging => "ranging",
    }
}

/// An item of the ordered inbox: a parsed command or a raw encoded
/// envelope to inject at the gateway.
#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Command(Request),
    Raw(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    pub tick: u64,
    pub text: String,
}

#[derive(Debug, Clone)]
struct Agent {
    id: AgentId,
    radius_m: f64,
    pose: Pose,
    v_mps: f64,
    omega_radps: f64,
    radio: Radio,
    fsm: LocFsmState,
    last_heard: u64,
    neighbors: NeighborRegistry,
    stig: StigTable,
    known: ManifestRegistry,
    manifest: ActionManifest,
    decls: Vec<ActionDecl>,
    behavior: BehaviorSpec,
    steer: SteerParams,
    waypoint: usize,
    goal: Option<(f64, f64)>,
    stopped: bool,
    motion: Motion,
    last_broadcast: Option<String>,
}

impl Agent {
    fn leader(&self) -> Option<AgentId> {
        self.stig
            .get(LEADER_KEY)
            .and_then(StigValue::as_int)
            .and_then(|v| AgentId::try_from(v).ok())
    }

    fn step_fsm(&mut self, event: FsmEvent, now: u64) -> Option<FsmAction> {
        let out = fsm_step(self.fsm, event, now);
        self.fsm = out.state;
        out.action
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldOptions {
    /// Pause and resume are only meaningful when someone can resume.
    pub interactive: bool,
}

#[derive(Debug, Clone)]
pub struct World {
    tick: u64,
    tick_s: f64,
    end_tick: u64,
    agents: Vec<Agent>,
    index: BTreeMap<AgentId, usize>,
    net: Network,
    schedule: SlotSchedule,
    slot_ticks: u64,
    superframe_ticks: u64,
    responders: Vec<usize>,
    array: AntennaArray,
    noise: NoiseModel,
    obstacles: Vec<Obstacle>,
    rng: ChaCha8Rng,
    gossip_period: u64,
    behavior_period: u64,
    window_ticks: u64,
    gateway: usize,
    inbox: VecDeque<(ClientTag, Inbound)>,
    events: Vec<(u64, Command)>,
    next_event: usize,
    pending_calls: BTreeMap<u32, (ClientTag, Option<u64>, AgentId)>,
    paused: bool,
    interactive: bool,
    snapshot_hz: f64,
    collisions: u64,
    contacts: BTreeSet<(usize, usize)>,
    window_start_bytes: u64,
    last_window_bps: f64,
    log: Vec<LogEntry>,
}

fn ticks_of(seconds: f64, tick_s: f64) -> u64 {
    ((seconds / tick_s) - 1e-9).ceil().max(1.0) as u64
}

impl World {
    pub fn new(s: &Scenario, opts: WorldOptions) -> Result<World, ScenarioError> {
        let mut specs: Vec<_> = s.agents.iter().collect();
        specs.sort_by_key(|a| a.id);
        let ids: Vec<AgentId> = specs.iter().map(|a| a.id).collect();
        let timing = s.schedule.timing();
        let schedule = build_schedule(&ids, s.n_slots(), timing).map_err(|e| ScenarioError::Invalid {
            line: None,
            message: format!("schedule: {e}"),
        })?;
        let slot_ticks = ticks_of(schedule.slot_duration(), s.tick_s);
        let superframe_ticks = slot_ticks * s.n_slots() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let preload = s.preload()?;
        let ttl = s.neighbor_ttl_superframes * superframe_ticks;
        let mut agents = Vec::with_capacity(specs.len());
        for spec in &specs {
            let manifest = manifest_of(spec)?;
            let mut stig = StigTable::new(spec.id);
            for (k, v) in &preload {
                stig.preload(k, v.clone());
            }
            let mut known = ManifestRegistry::new();
            known.register(manifest.clone());
            agents.push(Agent {
                id: spec.id,
                radius_m: spec.radius_m,
                pose: Pose::new(spec.pose.x_m, spec.pose.y_m, spec.pose.heading_rad),
                v_mps: 0.0,
                omega_radps: 0.0,
                radio: Radio::sample(&s.noise, &mut rng),
                fsm: LocFsmState::unsynced(),
                last_heard: 0,
                neighbors: NeighborRegistry::new(ttl),
                stig,
                known,
                decls: spec.manifest.clone(),
                manifest,
                behavior: spec.behavior.clone(),
                steer: s.steer_params(spec),
                waypoint: 0,
                goal: None,
                stopped: false,
                motion: Motion::Idle,
                last_broadcast: None,
            });
        }
        // the lowest id keeps time for the swarm
        let master_slot = schedule.slot_of(agents[0].id).expect("scheduled");
        agents[0].fsm = LocFsmState::bootstrap(master_slot, 0);
        let index = agents.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
        let mut events: Vec<(u64, Command)> = s
            .events
            .iter()
            .map(|e| ((e.at_s / s.tick_s).round() as u64, e.command.clone()))
            .collect();
        events.sort_by_key(|e| e.0);
        let mut world = World {
            tick: 0,
            tick_s: s.tick_s,
            end_tick: s.total_ticks(),
            net: Network::new(ids.iter().copied(), &s.network.config(), s.tick_s),
            agents,
            index,
            schedule,
            slot_ticks,
            superframe_ticks,
            responders: Vec::new(),
            array: s.array.array(),
            noise: s.noise,
            obstacles: s.obstacles.clone(),
            rng,
            gossip_period: ticks_of(1.0 / s.gossip_hz, s.tick_s),
            behavior_period: ticks_of(1.0 / s.behavior_hz, s.tick_s),
            window_ticks: ticks_of(s.metrics_window_s, s.tick_s),
            gateway: 0,
            inbox: VecDeque::new(),
            events,
            next_event: 0,
            pending_calls: BTreeMap::new(),
            paused: false,
            interactive: opts.interactive,
            snapshot_hz: 10.0,
            collisions: 0,
            contacts: BTreeSet::new(),
            window_start_bytes: 0,
            last_window_bps: 0.0,
            log: Vec::new(),
        };
        world.announce_manifests();
        Ok(world)
    }

    fn announce_manifests(&mut self) {
        for i in 0..self.agents.len() {
            let a = &self.agents[i];
            let Ok(payload) = encode_manifest(&a.manifest) else {
                continue;
            };
            if let Some(env) = Envelope::new(a.id, BROADCAST, MsgType::ManifestAnnounce, payload) {
                let _ = self.net.submit(0, a.id, Endpoint::Host, env);
            }
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn tick_s(&self) -> f64 {
        self.tick_s
    }

    pub fn sim_time_s(&self) -> f64 {
        self.tick as f64 * self.tick_s
    }

    pub fn end_tick(&self) -> u64 {
        self.end_tick
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn snapshot_hz(&self) -> f64 {
        self.snapshot_hz
    }

    pub fn superframe_ticks(&self) -> u64 {
        self.superframe_ticks
    }

    pub fn metrics_window_ticks(&self) -> u64 {
        self.window_ticks
    }

    pub fn collision_count(&self) -> u64 {
        self.collisions
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id).collect()
    }

    pub fn gateway_id(&self) -> AgentId {
        self.agents[self.gateway].id
    }

    pub fn pose(&self, id: AgentId) -> Option<Pose> {
        self.index.get(&id).map(|&i| self.agents[i].pose)
    }

    pub fn loc_state(&self, id: AgentId) -> Option<LocState> {
        self.index.get(&id).map(|&i| self.agents[i].fsm.state)
    }

    pub fn neighbors(&self, id: AgentId) -> Vec<NeighborEntry> {
        self.index
            .get(&id)
            .map(|&i| self.agents[i].neighbors.snapshot(self.tick))
            .unwrap_or_default()
    }

    pub fn stig_value(&self, id: AgentId, key: &str) -> Option<StigValue> {
        self.index.get(&id).and_then(|&i| self.agents[i].stig.get(key).cloned())
    }

    pub fn leader_of(&self, id: AgentId) -> Option<AgentId> {
        self.index.get(&id).and_then(|&i| self.agents[i].leader())
    }

    /// Queues a command for the next tick boundary.
    pub fn submit(&mut self, to: ClientTag, request: Request) {
        self.inbox.push_back((to, Inbound::Command(request)));
    }

    /// Queues an encoded envelope; it enters the network at the gateway's
    /// host link on the next tick boundary.
    pub fn submit_raw(&mut self, to: ClientTag, frame: Vec<u8>) {
        self.inbox.push_back((to, Inbound::Raw(frame)));
    }

    pub fn set_snapshot_hz(&mut self, hz: f64) {
        if hz.is_finite() && hz > 0.0 {
            self.snapshot_hz = hz;
        }
    }

    /// Applies due scripted events and queued commands, then advances one
    /// tick unless paused. Returns the replies produced.
    pub fn step(&mut self) -> Vec<Outbound> {
        let mut out = self.apply_pending();
        out.extend(self.advance());
        out
    }

    /// The first half of [`World::step`]: the tick-boundary command
    /// application.
    pub fn apply_pending(&mut self) -> Vec<Outbound> {
        let mut out = Vec::new();
        let mut due = Vec::new();
        while let Some((at, cmd)) = self.events.get(self.next_event) {
            if *at > self.tick || self.paused {
                break;
            }
            due.push((
                SCRIPT,
                Inbound::Command(Request {
                    req: None,
                    command: cmd.clone(),
                }),
            ));
            self.next_event += 1;
        }
        for r in due.into_iter().rev() {
            self.inbox.push_front(r);
        }
        self.apply_inbox(&mut out);
        out
    }

    /// The second half of [`World::step`]: one tick of simulation, skipped
    /// while paused.
    pub fn advance(&mut self) -> Vec<Outbound> {
        let mut out = Vec::new();
        if self.paused {
            return out;
        }
        let t = self.tick;
        self.localization(t);
        for d in self.net.advance(t) {
            self.deliver(d, t, &mut out);
        }
        for i in 0..self.agents.len() {
            if let Some(env) = self.agents[i].stig.gossip_tick(t, self.gossip_period) {
                let id = self.agents[i].id;
                let _ = self.net.submit(t, id, Endpoint::Board, env);
            }
        }
        if t.is_multiple_of(self.behavior_period) {
            for i in 0..self.agents.len() {
                self.behave(i, t);
            }
        }
        for a in &mut self.agents {
            a.pose = kinematics_step(&a.pose, a.v_mps, a.omega_radps, self.tick_s);
        }
        self.detect_collisions(t);
        self.tick += 1;
        if self.tick.is_multiple_of(self.window_ticks) {
            let bytes = self.net.stats().radio_bytes;
            let window_s = self.window_ticks as f64 * self.tick_s;
            self.last_window_bps = (bytes - self.window_start_bytes) as f64 / window_s;
        }
        out
    }

    /// True right after a step that closed a metrics window.
    pub fn at_window_boundary(&self) -> bool {
        self.tick > 0 && self.tick.is_multiple_of(self.window_ticks)
    }

    fn apply_inbox(&mut self, out: &mut Vec<Outbound>) {
        let pending = std::mem::take(&mut self.inbox);
        let mut deferred = VecDeque::new();
        for (to, item) in pending {
            let control = matches!(&item, Inbound::Command(r) if r.command.is_control());
            if self.paused && !control {
                deferred.push_back((to, item));
                continue;
            }
            let reply = match item {
                Inbound::Command(request) => self.apply(to, request),
                Inbound::Raw(frame) => self.inject(&frame),
            };
            out.push(Outbound { to, reply });
        }
        self.inbox = deferred;
    }

    fn ack(&self, req: Option<u64>, command: &Command) -> Reply {
        Reply::Ack {
            req,
            command: command.name().into(),
            tick: self.tick,
            call_id: None,
        }
    }

    fn record(&mut self, text: String) {
        self.log.push(LogEntry { tick: self.tick, text });
    }

    fn apply(&mut self, to: ClientTag, request: Request) -> Reply {
        let Request { req, command } = request;
        let err = |message: String| Reply::Error { req, message };
        let tick = self.tick;
        match &command {
            Command::ListAgents => Reply::Agents {
                req,
                tick,
                agents: self
                    .agents
                    .iter()
                    .map(|a| AgentInfo {
                        id: a.id,
                        actions: a.decls.clone(),
                    })
                    .collect(),
            },
            Command::GetManifest { agent } => match self.index.get(agent) {
                Some(&i) => Reply::Manifest {
                    req,
                    tick,
                    agent: *agent,
                    actions: self.agents[i].decls.clone(),
                },
                None => err(format!("unknown agent {agent}")),
            },
            Command::CallAction { target, name, args } => {
                if !self.index.contains_key(target) {
                    return err(format!("unknown agent {target}"));
                }
                let Some(args) = args.iter().map(JsonValue::to_arg).collect::<Option<Vec<ArgValue>>>() else {
                    return err("action arguments must be numbers or strings".into());
                };
                let g = self.gateway;
                let gid = self.agents[g].id;
                let (call_id, env) = match self.agents[g].known.prepare_call(gid, *target, name, args) {
                    Ok(c) => c,
                    Err(e) => return err(format!("call rejected: {e}")),
                };
                match self.net.submit(tick, gid, Endpoint::Host, env) {
                    Ok(true) => {
                        self.pending_calls.insert(call_id, (to, req, *target));
                        self.record(format!("call {call_id} {name} -> {target}"));
                        Reply::Ack {
                            req,
                            command: command.name().into(),
                            tick,
                            call_id: Some(call_id),
                        }
                    }
                    Ok(false) => err("call dropped: host link queue full".into()),
                    Err(e) => err(format!("call not sent: {e}")),
                }
            }
            Command::Broadcast { payload } => {
                let gid = self.agents[self.gateway].id;
                let Some(env) = Envelope::new(gid, BROADCAST, MsgType::UserBroadcast, payload.as_bytes().to_vec())
                else {
                    return err("broadcast payload too long".into());
                };
                match self.net.submit(tick, gid, Endpoint::Host, env) {
                    Ok(true) => self.ack(req, &command),
                    Ok(false) => err("broadcast dropped: host link queue full".into()),
                    Err(e) => err(format!("broadcast not sent: {e}")),
                }
            }
            Command::SetStig { key, value } => {
                let Some(v) = value.to_stig() else {
                    return err("value has no table type".into());
                };
                self.put_stig(key, v, req, &command)
            }
            Command::SetLeader { agent } => {
                if !self.index.contains_key(agent) {
                    return err(format!("unknown agent {agent}"));
                }
                self.put_stig(LEADER_KEY, StigValue::Int(i64::from(*agent)), req, &command)
            }
            Command::Pause | Command::Resume if !self.interactive => {
                err(format!("{} is only available in serve mode", command.name()))
            }
            Command::Pause => {
                self.paused = true;
                self.ack(req, &command)
            }
            Command::Resume => {
                self.paused = false;
                self.ack(req, &command)
            }
            Command::SetSnapshotRate { hz } => {
                if !(hz.is_finite() && *hz > 0.0 && *hz <= 1000.0) {
                    return err("snapshot rate must be in (0, 1000] Hz".into());
                }
                self.snapshot_hz = *hz;
                self.ack(req, &command)
            }
        }
    }

    fn inject(&mut self, frame: &[u8]) -> Reply {
        let err = |message: String| Reply::Error { req: None, message };
        let env = match decode(frame) {
            Ok(env) => env,
            Err(e) => return err(format!("malformed envelope: {e}")),
        };
        let gid = self.agents[self.gateway].id;
        match self.net.submit(self.tick, gid, Endpoint::Host, env) {
            Ok(true) => Reply::Ack {
                req: None,
                command: "raw".into(),
                tick: self.tick,
                call_id: None,
            },
            Ok(false) => err("envelope dropped: host link queue full".into()),
            Err(e) => err(format!("envelope not sent: {e}")),
        }
    }

    fn put_stig(&mut self, key: &str, v: StigValue, req: Option<u64>, command: &Command) -> Reply {
        match self.agents[self.gateway].stig.put(key, v) {
            Ok(e) => {
                self.record(format!("stigmergy {key} set at lamport {}", e.lamport));
                self.ack(req, command)
            }
            Err(e) => Reply::Error {
                req,
                message: format!("stigmergy write rejected: {e}"),
            },
        }
    }

    fn localization(&mut self, t: u64) {
        let sf = self.superframe_ticks;
        let st = self.slot_ticks;
        let phase = t % sf;
        let slot = (phase / st) as usize;
        if phase == 0 {
            for a in self.agents.iter_mut().filter(|a| a.fsm.is_synced()) {
                a.step_fsm(FsmEvent::SuperframeStart, t);
            }
        }
        let owner = self.schedule.owner_of(slot).map(|id| self.index[&id]);
        if phase.is_multiple_of(st) {
            self.responders.clear();
            if let Some(o) = owner {
                if self.agents[o].step_fsm(FsmEvent::MySlotStart, t) == Some(FsmAction::TransmitPoll) {
                    self.poll(o, t, t - phase);
                }
            }
        }
        if phase % st == st - 1 {
            if let Some(o) = owner {
                if self.agents[o].step_fsm(FsmEvent::SlotEnd, t) == Some(FsmAction::TransmitFinal) {
                    self.finish_round(o, t - (st - 1));
                }
            }
            for k in 0..self.agents.len() {
                if Some(k) != owner {
                    self.agents[k].step_fsm(FsmEvent::SlotEnd, t);
                }
            }
        }
        let timeout = 2 * sf;
        for k in 1..self.agents.len() {
            let a = &mut self.agents[k];
            if a.fsm.state != LocState::Unsynced && t.saturating_sub(a.last_heard) > timeout {
                a.step_fsm(FsmEvent::Timeout, t);
                a.last_heard = t;
                let id = a.id;
                self.record(format!("agent {id} lost synchronization"));
            }
        }
    }

    fn in_range(&self, a: usize, b: usize) -> bool {
        self.agents[a].pose.distance_to(&self.agents[b].pose) <= self.noise.max_range_m
    }

    /// The poll doubles as the sync frame for agents not yet synchronized.
    fn poll(&mut self, o: usize, t: u64, epoch: u64) {
        let from = self.agents[o].id;
        for j in 0..self.agents.len() {
            if j == o || !self.in_range(o, j) {
                continue;
            }
            let slot = self.schedule.slot_of(self.agents[j].id).expect("scheduled");
            let a = &mut self.agents[j];
            a.last_heard = t;
            if a.fsm.is_synced() {
                let action = a.step_fsm(
                    FsmEvent::FrameReceived {
                        kind: FrameKind::Poll,
                        from,
                    },
                    t,
                );
                if let Some(FsmAction::TransmitResponse { .. }) = action {
                    self.responders.push(j);
                    let responder = self.agents[j].id;
                    let owner = &mut self.agents[o];
                    owner.last_heard = t;
                    owner.step_fsm(
                        FsmEvent::FrameReceived {
                            kind: FrameKind::Response,
                            from: responder,
                        },
                        t,
                    );
                }
            } else {
                let was = a.fsm.state;
                a.step_fsm(
                    FsmEvent::SyncFrameReceived(SyncInfo {
                        epoch_tick: epoch,
                        slot,
                    }),
                    t,
                );
                if was == LocState::Unsynced {
                    let id = a.id;
                    self.record(format!("agent {id} heard sync from {from}"));
                }
            }
        }
    }

    /// The final closes the round; each responder then holds all six
    /// timestamps and the phases of the initiator's frames.
    fn finish_round(&mut self, o: usize, poll_tick: u64) {
        let from = self.agents[o].id;
        let start_ps = poll_tick as f64 * self.tick_s * 1e12;
        let now = poll_tick + self.slot_ticks - 1;
        for j in std::mem::take(&mut self.responders) {
            if self.agents[j].fsm.state != LocState::Ranging {
                continue;
            }
            self.agents[j].step_fsm(
                FsmEvent::FrameReceived {
                    kind: FrameKind::Final,
                    from,
                },
                now,
            );
            let m = channel_measure(
                Link {
                    pose: &self.agents[o].pose,
                    radio: &self.agents[o].radio,
                },
                Link {
                    pose: &self.agents[j].pose,
                    radio: &self.agents[j].radio,
                },
                &self.array,
                &self.noise,
                &self.obstacles,
                start_ps,
                &mut self.rng,
            );
            let Some(m) = m else { continue };
            if let Ok((distance_m, est)) = m.estimate(&self.array) {
                self.agents[j].neighbors.update(
                    now,
                    LocResult {
                        id: from,
                        distance_m,
                        bearing_rad: est.bearing_rad,
                        confidence: est.confidence,
                    },
                );
            }
        }
    }

    fn deliver(&mut self, d: Delivery, t: u64, out: &mut Vec<Outbound>) {
        let Some(&i) = self.index.get(&d.agent) else { return };
        let env = d.env;
        match (env.msg_type, d.endpoint) {
            (MsgType::StigUpdate, _) => {
                let _ = self.agents[i].stig.apply_update(&env.payload);
            }
            (MsgType::ManifestAnnounce, _) => {
                if let Ok(m) = decode_manifest(env.source, &env.payload) {
                    self.agents[i].known.register(m);
                }
            }
            (MsgType::ActionCall, _) => self.handle_call(i, &env, t),
            (MsgType::ActionResult, _) => {
                if i != self.gateway {
                    return;
                }
                let Ok(res) = decode_result(&env.payload) else { return };
                if let Some((to, req, target)) = self.pending_calls.remove(&res.call_id) {
                    out.push(Outbound {
                        to,
                        reply: Reply::ActionResult {
                            req,
                            call_id: res.call_id,
                            target,
                            ok: res.ok,
                            message: res.message,
                            tick: t,
                        },
                    });
                }
            }
            (MsgType::UserBroadcast, _) => {
                self.agents[i].last_broadcast = Some(String::from_utf8_lossy(&env.payload).into_owned());
            }
            (MsgType::SyncFrame, _) => {}
        }
    }

    fn handle_call(&mut self, i: usize, env: &Envelope, t: u64) {
        let (call_id, ok, message) = match decode_call(&env.payload) {
            Err(e) => (0, false, format!("malformed call: {e}")),
            Ok(call) => match self.agents[i].manifest.validate_call(&call.name, &call.args) {
                Err(e) => (call.call_id, false, e.to_string()),
                Ok(()) => {
                    let msg = self.run_action(i, &call.name, &call.args);
                    (call.call_id, true, msg)
                }
            },
        };
        let me = self.agents[i].id;
        let result = ActionResult { call_id, ok, message };
        if let Ok(payload) = encode_result(&result) {
            if let Some(reply) = Envelope::new(me, env.source, MsgType::ActionResult, payload) {
                let _ = self.net.submit(t, me, Endpoint::Host, reply);
            }
        }
    }

    /// Built-in host callbacks. Declared actions without a built-in
    /// succeed without effect.
    fn run_action(&mut self, i: usize, name: &str, args: &[ArgValue]) -> String {
        let a = &mut self.agents[i];
        match name {
            "moveBy" if args.len() == 2 => {
                let dx = args[0].as_real().unwrap_or(0.0);
                let dy = args[1].as_real().unwrap_or(0.0);
                let (gx, gy) = a.goal.unwrap_or((a.pose.x_m, a.pose.y_m));
                a.goal = Some((gx + dx, gy + dy));
                a.stopped = false;
                format!("goal ({:.3}, {:.3})", gx + dx, gy + dy)
            }
            "stop" => {
                a.stopped = true;
                a.goal = None;
                "stopped".into()
            }
            "resume" => {
                a.stopped = false;
                "resumed".into()
            }
            _ => "done".into(),
        }
    }

    fn behave(&mut self, i: usize, t: u64) {
        let neighbors = self.agents[i].neighbors.snapshot(t);
        let a = &mut self.agents[i];
        let hold = |m| (SteerCommand::HOLD, m);
        let (cmd, motion) = if a.stopped {
            hold(Motion::Stopped)
        } else if let Some(goal) = a.goal.filter(|g| dist(&a.pose, *g) >= GOAL_REACHED_M) {
            (
                steer_towards(bearing(&a.pose, goal), &neighbors, &a.steer),
                Motion::Moving,
            )
        } else {
            a.goal = None;
            match a.behavior.kind {
                BehaviorKind::Idle => hold(Motion::Idle),
                BehaviorKind::Drive => (
                    SteerCommand {
                        v_mps: a.behavior.v_mps,
                        omega_radps: a.behavior.omega_radps,
                        status: SteerStatus::Following,
                    },
                    Motion::Driving,
                ),
                BehaviorKind::FollowLeader => match a.leader() {
                    None => hold(Motion::Holding),
                    Some(l) if l == a.id => {
                        if a.behavior.waypoints.is_empty() {
                            hold(Motion::Leading)
                        } else {
                            let n = a.behavior.waypoints.len();
                            let mut wp = a.behavior.waypoints[a.waypoint % n];
                            if dist(&a.pose, (wp[0], wp[1])) < WAYPOINT_REACHED_M {
                                a.waypoint = (a.waypoint + 1) % n;
                                wp = a.behavior.waypoints[a.waypoint];
                            }
                            let p = SteerParams {
                                v_max_mps: a.behavior.patrol_speed_mps * yield_factor(&neighbors, &a.steer),
                                ..a.steer
                            };
                            // the scripted leader keeps its route and only slows for
                            // robots ahead; followers make way
                            (
                                steer_towards(bearing(&a.pose, (wp[0], wp[1])), &[], &p),
                                Motion::Leading,
                            )
                        }
                    }
                    Some(l) => {
                        let c = steer_follow_leader(&neighbors, l, &a.steer);
                        let m = match c.status {
                            SteerStatus::Following => Motion::Following,
                            SteerStatus::Holding => Motion::Holding,
                        };
                        (c, m)
                    }
                },
            }
        };
        a.v_mps = cmd.v_mps;
        a.omega_radps = cmd.omega_radps;
        a.motion = motion;
    }

    fn detect_collisions(&mut self, t: u64) {
        for i in 0..self.agents.len() {
            for j in i + 1..self.agents.len() {
                let (a, b) = (&self.agents[i], &self.agents[j]);
                let overlap = a.pose.distance_to(&b.pose) < a.radius_m + b.radius_m;
                if overlap && self.contacts.insert((i, j)) {
                    self.collisions += 1;
                    let text = format!("collision between {} and {}", a.id, b.id);
                    self.log.push(LogEntry { tick: t, text });
                } else if !overlap {
                    self.contacts.remove(&(i, j));
                }
            }
        }
    }

    /// True distance from an agent to the leader named in its own replica.
    pub fn leader_distance(&self, id: AgentId) -> Option<f64> {
        let a = &self.agents[*self.index.get(&id)?];
        let l = a.leader()?;
        let leader = &self.agents[*self.index.get(&l)?];
        Some(a.pose.distance_to(&leader.pose))
    }

    /// Mean position error of an agent's neighbor estimates.
    pub fn localization_error(&self, id: AgentId) -> Option<f64> {
        let a = &self.agents[*self.index.get(&id)?];
        let snap = a.neighbors.snapshot(self.tick);
        let errs: Vec<f64> = snap
            .iter()
            .filter_map(|n| {
                let other = &self.agents[*self.index.get(&n.id)?];
                let d = a.pose.distance_to(&other.pose);
                let b = a.pose.bearing_to(&other.pose);
                let (ex, ey) = (n.distance_m * n.bearing_rad.cos(), n.distance_m * n.bearing_rad.sin());
                Some(((ex - d * b.cos()).powi(2) + (ey - d * b.sin()).powi(2)).sqrt())
            })
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }

    pub fn metrics_row(&self) -> MetricsRow {
        let stats = self.net.stats();
        MetricsRow {
            time_s: self.sim_time_s(),
            collisions: self.collisions,
            radio_bytes: stats.radio_bytes - self.window_start_bytes,
            drops: stats.dropped,
            agents: self
                .agents
                .iter()
                .map(|a| AgentMetrics {
                    id: a.id,
                    x_m: a.pose.x_m,
                    y_m: a.pose.y_m,
                    heading_rad: a.pose.heading_rad,
                    leader_distance_m: self.leader_distance(a.id),
                    loc_error_m: self.localization_error(a.id),
                })
                .collect(),
        }
    }

    /// Emits the row of the window that just closed and starts the next.
    pub fn take_metrics_row(&mut self) -> MetricsRow {
        let row = self.metrics_row();
        self.window_start_bytes = self.net.stats().radio_bytes;
        row
    }

    pub fn snapshot(&self) -> Snapshot {
        let stats = self.net.stats();
        let gw = &self.agents[self.gateway];
        Snapshot {
            tick: self.tick,
            sim_time_s: self.sim_time_s(),
            paused: self.paused,
            agents: self
                .agents
                .iter()
                .map(|a| AgentView {
                    id: a.id,
                    pose: PoseView {
                        x_m: a.pose.x_m,
                        y_m: a.pose.y_m,
                        heading_rad: a.pose.heading_rad,
                    },
                    status: a.motion.as_str().into(),
                    loc_state: loc_state_name(a.fsm.state).into(),
                    leader: a.leader(),
                    leader_distance_m: self.leader_distance(a.id),
                    neighbors: a
                        .neighbors
                        .snapshot(self.tick)
                        .iter()
                        .map(|n| NeighborView {
                            id: n.id,
                            distance_m: n.distance_m,
                            bearing_rad: n.bearing_rad,
                            confidence: n.confidence,
                            age_ticks: n.age_ticks,
                        })
                        .collect(),
                    last_broadcast: a.last_broadcast.clone(),
                })
                .collect(),
            stigmergy: gw
                .stig
                .entries()
                .map(|e| (e.key.clone(), JsonValue::from(&e.value)))
                .collect(),
            counters: Counters {
                collisions: self.collisions,
                drops: stats.dropped,
                unroutable: stats.unroutable,
                delivered: stats.delivered,
                radio_bytes: stats.radio_bytes,
                bandwidth_bps: self.last_window_bps,
            },
        }
    }

    /// Runs headless until `end` or the scenario end, handing each closed
    /// metrics window and every reply to the callbacks.
    pub fn run_until(&mut self, end: u64, mut on_row: impl FnMut(&MetricsRow), mut on_reply: impl FnMut(&Outbound)) {
        while self.tick < end {
            for o in self.step() {
                on_reply(&o);
            }
            if self.at_window_boundary() {
                let row = self.take_metrics_row();
                on_row(&row);
            }
        }
    }
}

/// Speed factor of a scripted leader: 1 with nobody ahead, falling
/// linearly to 0 as the nearest robot ahead closes from `YIELD_FAR_M` to
/// `YIELD_NEAR_M`.
fn yield_factor(neighbors: &[NeighborEntry], p: &SteerParams) -> f64 {
    let ahead = FRAC_PI_2 + p.avoid_margin_rad;
    neighbors
        .iter()
        .filter(|n| wrap_pi(n.bearing_rad).abs() < ahead)
        .map(|n| ((n.distance_m - YIELD_NEAR_M) / (YIELD_FAR_M - YIELD_NEAR_M)).clamp(0.0, 1.0))
        .fold(1.0, f64::min)
}

fn dist(p: &Pose, g: (f64, f64)) -> f64 {
    (g.0 - p.x_m).hypot(g.1 - p.y_m)
}

/// Body-frame bearing of a world point.
fn bearing(p: &Pose, g: (f64, f64)) -> f64 {
    p.bearing_to(&Pose::new(g.0, g.1, 0.0))
}
