//! Swarm messaging: the binary envelope, fixed-capacity latency queues on
//! each hop of the host ↔ board ↔ network datapath, the dispatcher that
//! routes envelopes across those hops, and bandwidth accounting.

mod bandwidth;
mod frame;
mod network;
mod queue;
mod route;

pub use bandwidth::{predicted_bandwidth, BandwidthModel};
pub use frame::{decode, encode, DecodeError, Envelope, MsgType, HEADER_LEN};
pub use network::{Delivery, NetConfig, NetStats, Network, QueueStats};
pub use queue::HopQueue;
pub use route::{dispatch, target_endpoint, Direction, Endpoint, Hop, HopKind, Leg, Route, RouteError, RoutingTable};
