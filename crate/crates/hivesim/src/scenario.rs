//! Scenario documents: strict JSON with defaults for everything but the
//! agent list.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use hive_core::coordination::{ActionManifest, ActionSpec, ParamSpec, ParamType, SteerParams, StigValue};
use hive_core::localization::{AntennaArray, SlotTiming};
use hive_core::netlink::NetConfig;
use hive_core::AgentId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{NoiseModel, Obstacle};
use crate::control::{Command, JsonValue};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid { line: Option<usize>, message: String },
}

impl ScenarioError {
    fn invalid(message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            line: None,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub x_m: f64,
    pub y_m: f64,
    #[serde(default)]
    pub heading_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamTypeSpec {
    Int,
    Real,
    String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDecl {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamTypeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionDecl {
    pub name: String,
    #[serde(default)]
    pub params: Vec<ParamDecl>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    /// Patrol the waypoints while named leader in the stigmergy, follow
    /// the leader otherwise.
    #[default]
    FollowLeader,
    Idle,
    /// Constant speed and turn rate.
    Drive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorSpec {
    #[serde(default)]
    pub kind: BehaviorKind,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_patrol_speed")]
    pub patrol_speed_mps: f64,
    #[serde(default)]
    pub v_mps: f64,
    #[serde(default)]
    pub omega_radps: f64,
}

fn default_patrol_speed() -> f64 {
    0.25
}

impl Default for BehaviorSpec {
    fn default() -> Self {
        Self {
            kind: BehaviorKind::default(),
            waypoints: Vec::new(),
            patrol_speed_mps: default_patrol_speed(),
            v_mps: 0.0,
            omega_radps: 0.0,
        }
    }
}

/// Per-agent steering overrides; unset fields take the scenario values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerOverrides {
    pub k_attract: Option<f64>,
    pub k_repulse: Option<f64>,
    pub repulse_radius_m: Option<f64>,
    pub heading_gain: Option<f64>,
    pub v_max_mps: Option<f64>,
    pub heading_only_avoidance: Option<bool>,
    pub avoid_margin_rad: Option<f64>,
}

impl SteerOverrides {
    pub fn apply(&self, base: SteerParams) -> SteerParams {
        SteerParams {
            k_attract: self.k_attract.unwrap_or(base.k_attract),
            k_repulse: self.k_repulse.unwrap_or(base.k_repulse),
            repulse_radius_m: self.repulse_radius_m.unwrap_or(base.repulse_radius_m),
            heading_gain: self.heading_gain.unwrap_or(base.heading_gain),
            v_max_mps: self.v_max_mps.unwrap_or(base.v_max_mps),
            heading_only_avoidance: self.heading_only_avoidance.unwrap_or(base.heading_only_avoidance),
            avoid_margin_rad: self.avoid_margin_rad.unwrap_or(base.avoid_margin_rad),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: AgentId,
    pub pose: PoseSpec,
    #[serde(default = "default_radius")]
    pub radius_m: f64,
    #[serde(default)]
    pub manifest: Vec<ActionDecl>,
    #[serde(default)]
    pub behavior: BehaviorSpec,
    #[serde(default)]
    pub params: SteerOverrides,
}

fn default_radius() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteerSpec {
    pub k_attract: f64,
    pub k_repulse: f64,
    pub repulse_radius_m: f64,
    pub heading_gain: f64,
    pub v_max_mps: f64,
    pub heading_only_avoidance: bool,
    pub avoid_margin_rad: f64,
}

impl Default for SteerSpec {
    fn default() -> Self {
        let p = SteerParams::default();
        Self {
            k_attract: p.k_attract,
            k_repulse: p.k_repulse,
            repulse_radius_m: p.repulse_radius_m,
            heading_gain: p.heading_gain,
            v_max_mps: p.v_max_mps,
            heading_only_avoidance: p.heading_only_avoidance,
            avoid_margin_rad: p.avoid_margin_rad,
        }
    }
}

impl From<&SteerSpec> for SteerParams {
    fn from(s: &SteerSpec) -> Self {
        SteerParams {
            k_attract: s.k_attract,
            k_repulse: s.k_repulse,
            repulse_radius_m: s.repulse_radius_m,
            heading_gain: s.heading_gain,
            v_max_mps: s.v_max_mps,
            heading_only_avoidance: s.heading_only_avoidance,
            avoid_margin_rad: s.avoid_margin_rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    /// Defaults to the agent count, and at least 2.
    pub n_slots: Option<usize>,
    pub t_poll_s: f64,
    pub t_resp_s: f64,
    pub t_final_s: f64,
    pub t_proc_s: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        let t = SlotTiming::default();
        Self {
            n_slots: None,
            t_poll_s: t.t_poll_s,
            t_resp_s: t.t_resp_s,
            t_final_s: t.t_final_s,
            t_proc_s: t.t_proc_s,
        }
    }
}

impl ScheduleSpec {
    pub fn timing(&self) -> SlotTiming {
        SlotTiming {
            t_poll_s: self.t_poll_s,
            t_resp_s: self.t_resp_s,
            t_final_s: self.t_final_s,
            t_proc_s: self.t_proc_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    pub queue_capacity: usize,
    pub host_link_s: f64,
    pub inter_mcu_s: f64,
    pub radio_s: f64,
    pub ingress_host_link_s: f64,
    pub ingress_inter_mcu_s: f64,
    pub ingress_radio_s: f64,
    /// `null` removes the shared-medium limit.
    pub radio_capacity_bps: Option<f64>,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        let c = NetConfig::default();
        Self {
            queue_capacity: c.queue_capacity,
            host_link_s: c.host_link_s,
            inter_mcu_s: c.inter_mcu_s,
            radio_s: c.radio_s,
            ingress_host_link_s: c.ingress_host_link_s,
            ingress_inter_mcu_s: c.ingress_inter_mcu_s,
            ingress_radio_s: c.ingress_radio_s,
            radio_capacity_bps: c.radio_capacity_bps,
        }
    }
}

impl NetworkSpec {
    pub fn config(&self) -> NetConfig {
        NetConfig {
            queue_capacity: self.queue_capacity,
            host_link_s: self.host_link_s,
            inter_mcu_s: self.inter_mcu_s,
            radio_s: self.radio_s,
            ingress_host_link_s: self.ingress_host_link_s,
            ingress_inter_mcu_s: self.ingress_inter_mcu_s,
            ingress_radio_s: self.ingress_radio_s,
            radio_capacity_bps: self.radio_capacity_bps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySpec {
    pub spacing_m: f64,
    pub wavelength_m: f64,
    pub pair_orientations_rad: [f64; 3],
}

impl Default for ArraySpec {
    fn default() -> Self {
        let a = AntennaArray::default();
        Self {
            spacing_m: a.spacing_m,
            wavelength_m: a.wavelength_m,
            pair_orientations_rad: a.pair_orientations_rad,
        }
    }
}

impl ArraySpec {
    pub fn array(&self) -> AntennaArray {
        AntennaArray {
            spacing_m: self.spacing_m,
            wavelength_m: self.wavelength_m,
            pair_orientations_rad: self.pair_orientations_rad,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub at_s: f64,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick")]
    pub tick_s: f64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub array: ArraySpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub network: NetworkSpec,
    #[serde(default)]
    pub steer: SteerSpec,
    #[serde(default = "default_rate")]
    pub gossip_hz: f64,
    #[serde(default = "default_rate")]
    pub behavior_hz: f64,
    #[serde(default = "default_ttl")]
    pub neighbor_ttl_superframes: u64,
    #[serde(default = "default_window")]
    pub metrics_window_s: f64,
    #[serde(default)]
    pub stigmergy: BTreeMap<String, JsonValue>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

fn default_tick() -> f64 {
    0.001
}
fn default_duration() -> f64 {
    10.0
}
fn default_rate() -> f64 {
    10.0
}
fn default_ttl() -> u64 {
    3
}
fn default_window() -> f64 {
    0.1
}

impl Scenario {
    pub fn n_slots(&self) -> usize {
        self.schedule.n_slots.unwrap_or(self.agents.len()).max(2)
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration_s / self.tick_s).round() as u64
    }

    pub fn steer_params(&self, agent: &AgentSpec) -> SteerParams {
        agent.params.apply(SteerParams::from(&self.steer))
    }

    pub fn preload(&self) -> Result<Vec<(String, StigValue)>, ScenarioError> {
        self.stigmergy
            .iter()
            .map(|(k, v)| {
                let value = v
                    .to_stig()
                    .ok_or_else(|| ScenarioError::invalid(format!("stigmergy value for {k:?} has no table type")))?;
                Ok((k.clone(), value))
            })
            .collect()
    }
}

pub fn manifest_of(agent: &AgentSpec) -> Result<ActionManifest, ScenarioError> {
    let actions = agent
        .manifest
        .iter()
        .map(|a| ActionSpec {
            name: a.name.clone(),
            params: a
                .params
                .iter()
                .map(|p| ParamSpec {
                    name: p.name.clone(),
                    ty: match p.ty {
                        ParamTypeSpec::Int => ParamType::Int,
                        ParamTypeSpec::Real => ParamType::Real,
                        ParamTypeSpec::String => ParamType::Str,
                    },
                })
                .collect(),
        })
        .collect();
    ActionManifest::new(agent.id, actions).map_err(|e| ScenarioError::invalid(format!("agent {}: {e}", agent.id)))
}

/// Line of the `nth` (0-based) line containing every needle.
fn locate(text: &str, needles: &[&str], nth: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| needles.iter().all(|n| l.contains(n)))
        .nth(nth)
        .map(|(i, _)| i + 1)
}

pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate(&s, text)?;
    Ok(s)
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_scenario(&text)
}

fn check(cond: bool, text: &str, needles: &[&str], message: impl FnOnce() -> String) -> Result<(), ScenarioError> {
    if cond {
        return Ok(());
    }
    Err(ScenarioError::Invalid {
        line: locate(text, needles, 0),
        message: message(),
    })
}

fn validate(s: &Scenario, text: &str) -> Result<(), ScenarioError> {
    check(s.tick_s.is_finite() && s.tick_s > 0.0, text, &["\"tick_s\""], || {
        "tick_s must be positive".into()
    })?;
    check(
        s.duration_s.is_finite() && s.duration_s >= 0.0,
        text,
        &["\"duration_s\""],
        || "duration_s must be non-negative".into(),
    )?;
    check(!s.agents.is_empty(), text, &["\"agents\""], || {
        "at least one agent is required".into()
    })?;
    let mut seen = BTreeSet::new();
    for a in &s.agents {
        if !seen.insert(a.id) {
            let pattern = format!("{}", a.id);
            return Err(ScenarioError::Invalid {
                line: locate(text, &["\"id\"", &pattern], 1),
                message: format!("duplicate agent id {}", a.id),
            });
        }
        check(a.id != hive_core::BROADCAST, text, &["\"id\""], || {
            format!("agent id {} is reserved for broadcast", a.id)
        })?;
        check(
            a.pose.x_m.is_finite() && a.pose.y_m.is_finite() && a.pose.heading_rad.is_finite(),
            text,
            &["\"pose\""],
            || format!("agent {}: pose must be finite", a.id),
        )?;
        check(a.radius_m > 0.0, text, &["\"radius_m\""], || {
            format!("agent {}: radius_m must be positive", a.id)
        })?;
        check(
            a.behavior.patrol_speed_mps >= 0.0,
            text,
            &["\"patrol_speed_mps\""],
            || format!("agent {}: patrol_speed_mps must be non-negative", a.id),
        )?;
        let p = s.steer_params(a);
        check(
            p.k_attract > 0.0
                && p.k_repulse > 0.0
                && p.repulse_radius_m > 0.0
                && p.heading_gain > 0.0
                && p.v_max_mps > 0.0,
            text,
            &["\"params\""],
            || format!("agent {}: steering gains must be positive", a.id),
        )?;
        check(
            (0.0..std::f64::consts::FRAC_PI_2).contains(&p.avoid_margin_rad),
            text,
            &["\"avoid_margin_rad\""],
            || format!("agent {}: avoid_margin_rad must be in [0, pi/2)", a.id),
        )?;
        manifest_of(a)?;
    }
    let n = s.noise;
    check(
        n.dist_sigma_m >= 0.0 && n.angle_sigma_rad >= 0.0 && n.angle_offset_sigma_rad >= 0.0,
        text,
        &["\"noise\""],
        || "noise sigmas must be non-negative".into(),
    )?;
    check(n.max_range_m > 0.0, text, &["\"max_range_m\""], || {
        "max_range_m must be positive".into()
    })?;
    check(n.clock_drift_ppm.abs() <= 100.0, text, &["\"clock_drift_ppm\""], || {
        "clock_drift_ppm must be within 100".into()
    })?;
    s.array.array().validate().map_err(|e| ScenarioError::Invalid {
        line: locate(text, &["\"array\""], 0),
        message: format!("antenna array: {e}"),
    })?;
    let timing = s.schedule.timing();
    timing.validate().map_err(|e| ScenarioError::Invalid {
        line: locate(text, &["\"schedule\""], 0),
        message: format!("schedule: {e}"),
    })?;
    check(s.agents.len() <= s.n_slots(), text, &["\"n_slots\""], || {
        format!("{} agents do not fit in {} slots", s.agents.len(), s.n_slots())
    })?;
    check(
        s.gossip_hz > 0.0 && s.behavior_hz > 0.0 && s.metrics_window_s > 0.0,
        text,
        &["_hz"],
        || "rates and the metrics window must be positive".into(),
    )?;
    check(
        s.neighbor_ttl_superframes >= 1,
        text,
        &["\"neighbor_ttl_superframes\""],
        || "neighbor_ttl_superframes must be at least 1".into(),
    )?;
    check(s.network.queue_capacity >= 1, text, &["\"queue_capacity\""], || {
        "queue_capacity must be at least 1".into()
    })?;
    s.preload()?;
    for o in &s.obstacles {
        check(o.radius_m > 0.0, text, &["\"obstacles\""], || {
            "obstacle radius must be positive".into()
        })?;
    }
    for e in &s.events {
        check(e.at_s.is_finite() && e.at_s >= 0.0, text, &["\"at_s\""], || {
            "event times must be non-negative".into()
        })?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{ "agents": [ { "id": 1, "pose": { "x_m": 0, "y_m": 0 } } ] }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let s = load_scenario(MINIMAL).unwrap();
        assert_eq!(s.tick_s, 0.001);
        assert_eq!(s.duration_s, 10.0);
        assert_eq!(s.n_slots(), 2);
        assert_eq!(s.agents[0].radius_m, 0.2);
        assert_eq!(s.agents[0].behavior.kind, BehaviorKind::FollowLeader);
        assert_eq!(s.noise, NoiseModel::default());
        assert_eq!(s.total_ticks(), 10_000);
    }

    #[test]
    fn unknown_key_is_rejected_with_position() {
        let text = "{\n  \"agents\": [],\n  \"speed\": 3\n}";
        match load_scenario(text) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_id_points_at_second_agent() {
        let text = r#"{
  "agents": [
    { "id": 4, "pose": { "x_m": 0, "y_m": 0 } },
    { "id": 4, "pose": { "x_m": 1, "y_m": 0 } }
  ]
}"#;
        match load_scenario(text) {
            Err(ScenarioError::Invalid { line, message }) => {
                assert_eq!(line, Some(4));
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overfull_schedule_is_rejected() {
        let text = r#"{ "schedule": { "n_slots": 2 }, "agents": [
            { "id": 1, "pose": { "x_m": 0, "y_m": 0 } },
            { "id": 2, "pose": { "x_m": 1, "y_m": 0 } },
            { "id": 3, "pose": { "x_m": 2, "y_m": 0 } } ] }"#;
        assert!(matches!(load_scenario(text), Err(ScenarioError::Invalid { .. })));
    }

    #[test]
    fn negative_tick_is_rejected() {
        let text = r#"{ "tick_s": -1, "agents": [ { "id": 1, "pose": { "x_m": 0, "y_m": 0 } } ] }"#;
        assert!(matches!(
            load_scenario(text),
            Err(ScenarioError::Invalid { line: Some(1), .. })
        ));
    }

    #[test]
    fn manifest_and_overrides() {
        let text = r#"{ "agents": [ { "id": 1, "pose": { "x_m": 0, "y_m": 0 },
            "manifest": [ { "name": "moveBy", "params": [ { "name": "x", "type": "real" }, { "name": "y", "type": "real" } ] } ],
            "params": { "v_max_mps": 0.3 } } ],
            "stigmergy": { "leader": 1, "mode": "patrol" } }"#;
        let s = load_scenario(text).unwrap();
        let m = manifest_of(&s.agents[0]).unwrap();
        assert_eq!(m.action("moveBy").unwrap().params.len(), 2);
        assert_eq!(s.steer_params(&s.agents[0]).v_max_mps, 0.3);
        assert_eq!(s.steer_params(&s.agents[0]).k_repulse, 2.0);
        let pre = s.preload().unwrap();
        assert!(pre.contains(&("leader".to_string(), StigValue::Int(1))));
    }
}
