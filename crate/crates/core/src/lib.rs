//! Algorithmic core of the hive swarm stack.
//!
//! Everything here is pure and allocation-light so it can run on a board
//! without an OS: two-way ranging and angle-of-arrival fusion
//! ([`localization`]), message framing, hop queues and the datapath
//! dispatcher ([`netlink`]), the replicated stigmergy table, neighbor
//! registry, action manifests and leader-following steering
//! ([`coordination`]), plus unicycle kinematics ([`kinematics`]).
//!
//! The crate is `no_std` unless the `std` feature is enabled; it only needs
//! `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coordination;
pub mod kinematics;
pub mod localization;
pub mod math;
pub mod netlink;

/// Identifier of an agent in the swarm. `0xFFFF` is reserved for broadcast.
pub type AgentId = u16;

/// Destination id meaning "every reachable agent".
pub const BROADCAST: AgentId = 0xFFFF;
