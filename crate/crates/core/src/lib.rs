//! Deterministic simulator for federated learning over a shared wireless
//! uplink with heterogeneous client compute.
//!
//! The crate models two training architectures end to end: a traditional
//! server-aggregated loop with compute-tiered client sampling and optimal
//! resource-block assignment, and a peer-to-peer loop that trains the
//! model along planned transmission chains. Every stochastic choice is
//! seeded, so runs reproduce byte-for-byte.

pub mod channel;
pub mod cli;
pub mod data;
pub mod engine;
pub mod error;
pub mod model;
pub mod p2p;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
