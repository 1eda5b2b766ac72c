//! The guide's chapters as doc comments, so `cargo test` runs every
//! snippet in the book.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/networks.md")]
pub mod networks {}

#[doc = include_str!("../../../book/src/bisimulation.md")]
pub mod bisimulation {}

#[doc = include_str!("../../../book/src/solvability.md")]
pub mod solvability {}

#[doc = include_str!("../../../book/src/running.md")]
pub mod running {}

#[doc = include_str!("../../../book/src/knowledge.md")]
pub mod knowledge {}

#[doc = include_str!("../../../book/src/election.md")]
pub mod election {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}

#[doc = include_str!("../../../README.md")]
pub mod readme {}
