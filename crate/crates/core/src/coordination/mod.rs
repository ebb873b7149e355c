//! Swarm coordination on top of localization and messaging: the replicated
//! stigmergy table, the neighbor registry, host action manifests and the
//! follow-the-leader steering law.

mod manifest;
mod neighbors;
mod steering;
mod stigmergy;
mod wire;

pub use manifest::{
    decode_call, decode_manifest, decode_result, encode_call, encode_manifest, encode_result, ActionCall,
    ActionManifest, ActionResult, ActionSpec, ArgValue, CallError, ManifestRegistry, ParamSpec, ParamType,
};
pub use neighbors::{LocResult, NeighborEntry, NeighborRegistry};
pub use steering::{steer_follow_leader, steer_towards, SteerCommand, SteerParams, SteerStatus, AVOID_MARGIN_RAD};
pub use stigmergy::{decode_update, encode_update, stig_merge, StigEntry, StigError, StigTable, StigValue};
pub use wire::WireError;
