//! Global function computation on labeled networks.
//!
//! The crate decides when every agent of a network can learn a function of
//! the whole network, simulates the protocols that do so, and checks
//! message-optimized leader election protocols against a knowledge-based
//! rule for when a message is worth sending.

pub mod bisim;
pub mod cli;
pub mod election;
pub mod epistemic;
pub mod network;
pub mod runtime;
pub mod solvability;

pub use network::{parse_network, GlobalFunction, Network, NetworkFamily};
