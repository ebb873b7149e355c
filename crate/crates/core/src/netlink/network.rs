use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::route::{dispatch, Direction, Endpoint, Hop, HopKind, Leg, RouteError, RoutingTable};
use super::{Envelope, HopQueue};
use crate::AgentId;

/// Queue sizes, per-hop latencies and the shared radio capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub queue_capacity: usize,
    pub host_link_s: f64,
    pub inter_mcu_s: f64,
    pub radio_s: f64,
    /// Latencies on the receiving side of each link.
    pub ingress_host_link_s: f64,
    pub ingress_inter_mcu_s: f64,
    pub ingress_radio_s: f64,
    /// Aggregate bytes per second the shared medium can carry; `None`
    /// disables the limit.
    pub radio_capacity_bps: Option<f64>,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            queue_capacity: HopQueue::<()>::DEFAULT_CAPACITY,
            host_link_s: 1e-3,
            inter_mcu_s: 9e-3,
            radio_s: 3e-3,
            ingress_host_link_s: 0.0,
            ingress_inter_mcu_s: 0.0,
            ingress_radio_s: 0.0,
            radio_capacity_bps: Some(1.9e6),
        }
    }
}

fn to_ticks(seconds: f64, tick_s: f64) -> u64 {
    libm::ceil(seconds / tick_s - 1e-9).max(0.0) as u64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub agent: AgentId,
    pub endpoint: Endpoint,
    pub env: Envelope,
    pub sent_at: u64,
    pub delivered_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueueStats {
    pub len: usize,
    pub capacity: usize,
    pub latency_ticks: u64,
    pub accepted: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub submitted: u64,
    pub delivered: u64,
    /// Arrivals refused by a full hop queue.
    pub dropped: u64,
    pub unroutable: u64,
    /// Bytes sent plus bytes received on radio hops.
    pub radio_bytes: u64,
}

#[derive(Debug, Clone)]
struct Packet {
    env: Envelope,
    hops: Vec<Hop>,
    next: usize,
    /// Receiving legs still to spawn once the egress hops are done; empty
    /// for a packet that is itself on a leg.
    legs: Vec<Leg>,
    dest: Option<(AgentId, Endpoint)>,
    sent_at: u64,
}

const QUEUES: [(HopKind, Direction); 6] = [
    (HopKind::HostLink, Direction::Egress),
    (HopKind::InterMcu, Direction::Egress),
    (HopKind::Radio, Direction::Egress),
    (HopKind::Radio, Direction::Ingress),
    (HopKind::InterMcu, Direction::Ingress),
    (HopKind::HostLink, Direction::Ingress),
];

fn queue_index(kind: HopKind, dir: Direction) -> usize {
    QUEUES
        .iter()
        .position(|q| *q == (kind, dir))
        .expect("every hop has a queue")
}

/// The hop queues of every agent plus the shared medium.
///
/// Time is in integer ticks; latencies are rounded up to whole ticks.
/// [`advance`](Network::advance) must be called with non-decreasing times.
#[derive(Debug, Clone)]
pub struct Network {
    table: RoutingTable,
    queues: BTreeMap<AgentId, [HopQueue<Packet>; 6]>,
    ready: Vec<Delivery>,
    radio_bytes_per_tick: Option<f64>,
    burst_bytes: f64,
    tokens: f64,
    last_refill: u64,
    stats: NetStats,
}

impl Network {
    pub fn new(ids: impl IntoIterator<Item = AgentId>, config: &NetConfig, tick_s: f64) -> Self {
        let table = RoutingTable::new(ids);
        let lat = |kind, dir| {
            let s = match (kind, dir) {
                (HopKind::HostLink, Direction::Egress) => config.host_link_s,
                (HopKind::InterMcu, Direction::Egress) => config.inter_mcu_s,
                (HopKind::Radio, Direction::Egress) => config.radio_s,
                (HopKind::HostLink, Direction::Ingress) => config.ingress_host_link_s,
                (HopKind::InterMcu, Direction::Ingress) => config.ingress_inter_mcu_s,
                (HopKind::Radio, Direction::Ingress) => config.ingress_radio_s,
            };
            to_ticks(s, tick_s)
        };
        let queues = table
            .ids()
            .map(|id| {
                let qs = QUEUES.map(|(k, d)| HopQueue::new(config.queue_capacity, lat(k, d)));
                (id, qs)
            })
            .collect();
        let radio_bytes_per_tick = config.radio_capacity_bps.map(|bps| bps * tick_s);
        // 10 ms worth of air time, and never less than one maximal frame
        let burst_bytes = config
            .radio_capacity_bps
            .map(|bps| (bps * 0.01).max(65_542.0))
            .unwrap_or(0.0);
        Self {
            table,
            queues,
            ready: Vec::new(),
            radio_bytes_per_tick,
            burst_bytes,
            tokens: burst_bytes,
            last_refill: 0,
            stats: NetStats::default(),
        }
    }

    pub fn routing(&self) -> &RoutingTable {
        &self.table
    }

    pub fn routing_mut(&mut self) -> &mut RoutingTable {
        &mut self.table
    }

    pub fn stats(&self) -> NetStats {
        self.stats
    }

    pub fn queue_stats(&self, agent: AgentId, kind: HopKind, dir: Direction) -> Option<QueueStats> {
        self.queues.get(&agent).map(|qs| {
            let q = &qs[queue_index(kind, dir)];
            QueueStats {
                len: q.len(),
                capacity: q.capacity(),
                latency_ticks: q.latency(),
                accepted: q.accepted_count(),
                dropped: q.dropped_count(),
            }
        })
    }

    /// Total latency in ticks of an uncontended traversal of `hops`.
    pub fn path_latency(&self, hops: &[Hop]) -> u64 {
        hops.iter()
            .filter_map(|h| self.queue_stats(h.agent, h.kind, h.dir).map(|q| q.latency_ticks))
            .sum()
    }

    /// Injects an envelope at agent `at` coming from `origin`. Unroutable
    /// unicasts are counted and rejected. Returns `false` when the first
    /// hop's queue was full.
    pub fn submit(&mut self, now: u64, at: AgentId, origin: Endpoint, env: Envelope) -> Result<bool, RouteError> {
        let route = match dispatch(&self.table, &env, at, origin) {
            Ok(r) => r,
            Err(e) => {
                self.stats.unroutable += 1;
                return Err(e);
            }
        };
        self.stats.submitted += 1;
        let packet = Packet {
            env,
            hops: route.egress,
            next: 0,
            legs: route.legs,
            dest: None,
            sent_at: now,
        };
        Ok(self.forward(packet, now))
    }

    /// Moves a packet to its next hop, or finishes it. Returns `false` if it
    /// was dropped on a full queue.
    fn forward(&mut self, mut packet: Packet, now: u64) -> bool {
        if let Some(hop) = packet.hops.get(packet.next).copied() {
            let Some(qs) = self.queues.get_mut(&hop.agent) else {
                return false;
            };
            let accepted = qs[queue_index(hop.kind, hop.dir)].enqueue(packet, now);
            if !accepted {
                self.stats.dropped += 1;
            }
            return accepted;
        }
        if let Some((agent, endpoint)) = packet.dest {
            self.stats.delivered += 1;
            self.ready.push(Delivery {
                agent,
                endpoint,
                env: packet.env,
                sent_at: packet.sent_at,
                delivered_at: now,
            });
            return true;
        }
        let legs = core::mem::take(&mut packet.legs);
        for leg in legs {
            let copy = Packet {
                env: packet.env.clone(),
                hops: leg.hops,
                next: 0,
                legs: Vec::new(),
                dest: Some((leg.agent, leg.endpoint)),
                sent_at: packet.sent_at,
            };
            self.forward(copy, now);
        }
        true
    }

    fn refill(&mut self, now: u64) {
        if let Some(rate) = self.radio_bytes_per_tick {
            let elapsed = now.saturating_sub(self.last_refill) as f64;
            self.tokens = (self.tokens + rate * elapsed).min(self.burst_bytes);
        }
        self.last_refill = self.last_refill.max(now);
    }

    /// Services every queue up to `now` and returns the envelopes that
    /// reached their endpoint. Zero-latency hops pass through within the
    /// same call.
    pub fn advance(&mut self, now: u64) -> Vec<Delivery> {
        self.refill(now);
        let ids: Vec<AgentId> = self.queues.keys().copied().collect();
        loop {
            let mut moved = Vec::new();
            for id in &ids {
                for (qi, (kind, dir)) in QUEUES.iter().enumerate() {
                    let limited =
                        *kind == HopKind::Radio && *dir == Direction::Egress && self.radio_bytes_per_tick.is_some();
                    let tokens = &mut self.tokens;
                    let q = &mut self.queues.get_mut(id).expect("id from keys")[qi];
                    let departures = if limited {
                        q.service_gated(now, |p, _| {
                            let len = p.env.encoded_len() as f64;
                            if *tokens >= len {
                                *tokens -= len;
                                true
                            } else {
                                false
                            }
                        })
                    } else {
                        q.service(now)
                    };
                    for (p, t) in departures {
                        if *kind == HopKind::Radio {
                            self.stats.radio_bytes += p.env.encoded_len() as u64;
                        }
                        moved.push((p, t));
                    }
                }
            }
            if moved.is_empty() {
                break;
            }
            for (mut p, t) in moved {
                p.next += 1;
                self.forward(p, t);
            }
        }
        core::mem::take(&mut self.ready)
    }

    pub fn is_idle(&self) -> bool {
        self.ready.is_empty() && self.queues.values().all(|qs| qs.iter().all(|q| q.is_empty()))
    }
}
