use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{Envelope, MsgType};
use crate::AgentId;

/// Roles inside one agent. `Network` is only a valid origin: the envelope
/// arrived over the radio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Host,
    Board,
    Network,
}

/// Physical links of the datapath, host side first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HopKind {
    /// Host ↔ board (USB/Ethernet).
    HostLink,
    /// Board MCU ↔ network MCU.
    InterMcu,
    /// Network MCU ↔ air.
    Radio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// Towards the air.
    Egress,
    /// Towards the host.
    Ingress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hop {
    pub agent: AgentId,
    pub kind: HopKind,
    pub dir: Direction,
}

/// The receiving side of a route on one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub agent: AgentId,
    pub endpoint: Endpoint,
    pub hops: Vec<Hop>,
}

/// Hops taken on the sending agent, then one leg per receiving agent.
/// Broadcasts duplicate at the end of the egress hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub egress: Vec<Hop>,
    pub legs: Vec<Leg>,
}

impl Route {
    pub fn hop_count(&self) -> usize {
        self.egress.len() + self.legs.iter().map(|l| l.hops.len()).sum::<usize>()
    }

    /// Hops followed by the copy delivered to `agent`.
    pub fn path_to(&self, agent: AgentId) -> Option<Vec<Hop>> {
        let leg = self.legs.iter().find(|l| l.agent == agent)?;
        Some(self.egress.iter().chain(&leg.hops).copied().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteError {
    Unroutable(AgentId),
    UnknownOrigin(AgentId),
}

impl fmt::Display for RouteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RouteError::Unroutable(id) => write!(f, "no route to agent {id}"),
            RouteError::UnknownOrigin(id) => write!(f, "agent {id} is not part of the network"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RouteError {}

/// Agent id → reachable flag, kept by the network MCU's dispatcher.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoutingTable {
    reachable: BTreeMap<AgentId, bool>,
}

impl RoutingTable {
    pub fn new(ids: impl IntoIterator<Item = AgentId>) -> Self {
        Self {
            reachable: ids.into_iter().map(|id| (id, true)).collect(),
        }
    }

    pub fn set_reachable(&mut self, id: AgentId, reachable: bool) {
        self.reachable.insert(id, reachable);
    }

    pub fn contains(&self, id: AgentId) -> bool {
        self.reachable.contains_key(&id)
    }

    pub fn is_reachable(&self, id: AgentId) -> bool {
        self.reachable.get(&id).copied().unwrap_or(false)
    }

    pub fn ids(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.reachable.keys().copied()
    }
}

/// Which role consumes a message type: stigmergy and sync traffic stays on
/// the board, everything else is for the host.
pub fn target_endpoint(msg_type: MsgType) -> Endpoint {
    match msg_type {
        MsgType::StigUpdate | MsgType::SyncFrame => Endpoint::Board,
        MsgType::ActionCall | MsgType::ActionResult | MsgType::ManifestAnnounce | MsgType::UserBroadcast => {
            Endpoint::Host
        }
    }
}

fn egress_from(agent: AgentId, origin: Endpoint) -> Vec<Hop> {
    let hop = |kind| Hop {
        agent,
        kind,
        dir: Direction::Egress,
    };
    match origin {
        Endpoint::Host => vec![hop(HopKind::HostLink), hop(HopKind::InterMcu), hop(HopKind::Radio)],
        Endpoint::Board => vec![hop(HopKind::InterMcu), hop(HopKind::Radio)],
        Endpoint::Network => vec![],
    }
}

fn ingress_to(agent: AgentId, target: Endpoint) -> Vec<Hop> {
    let hop = |kind| Hop {
        agent,
        kind,
        dir: Direction::Ingress,
    };
    match target {
        Endpoint::Host => vec![hop(HopKind::Radio), hop(HopKind::InterMcu), hop(HopKind::HostLink)],
        Endpoint::Board => vec![hop(HopKind::Radio), hop(HopKind::InterMcu)],
        Endpoint::Network => vec![],
    }
}

fn local_path(agent: AgentId, from: Endpoint, to: Endpoint) -> Vec<Hop> {
    let dir = match (from, to) {
        (Endpoint::Host, Endpoint::Board) => Direction::Egress,
        (Endpoint::Board, Endpoint::Host) => Direction::Ingress,
        _ => return vec![],
    };
    vec![Hop {
        agent,
        kind: HopKind::HostLink,
        dir,
    }]
}

/// Computes the hops an envelope takes when injected at agent `at` by
/// `origin`.
///
/// Messages for the same agent short-circuit inside it. Unicasts to other
/// agents leave through the local egress hops and enter the destination
/// through its ingress hops; broadcasts fan out to every other reachable
/// agent after the radio hop. An envelope arriving from the network
/// (`origin = Network`) only takes the local ingress hops.
pub fn dispatch(table: &RoutingTable, env: &Envelope, at: AgentId, origin: Endpoint) -> Result<Route, RouteError> {
    if !table.contains(at) {
        return Err(RouteError::UnknownOrigin(at));
    }
    let target = target_endpoint(env.msg_type);

    if origin == Endpoint::Network {
        return Ok(Route {
            egress: vec![],
            legs: vec![Leg {
                agent: at,
                endpoint: target,
                hops: ingress_to(at, target),
            }],
        });
    }

    if env.dest == at {
        return Ok(Route {
            egress: vec![],
            legs: vec![Leg {
                agent: at,
                endpoint: target,
                hops: local_path(at, origin, target),
            }],
        });
    }

    let legs: Vec<Leg> = if env.is_broadcast() {
        table
            .ids()
            .filter(|id| *id != at && table.is_reachable(*id))
            .map(|id| Leg {
                agent: id,
                endpoint: target,
                hops: ingress_to(id, target),
            })
            .collect()
    } else {
        if !table.is_reachable(env.dest) {
            return Err(RouteError::Unroutable(env.dest));
        }
        vec![Leg {
            agent: env.dest,
            endpoint: target,
            hops: ingress_to(env.dest, target),
        }]
    };
    Ok(Route {
        egress: egress_from(at, origin),
        legs,
    })
}
