//! Swarm simulator: a deterministic world built on `hive-core`, benchmark
//! experiments, metrics output and a live control service.

pub mod bench;
pub mod channel;
pub mod cli;
pub mod control;
pub mod metrics;
pub mod scenario;
pub mod server;
pub mod world;
