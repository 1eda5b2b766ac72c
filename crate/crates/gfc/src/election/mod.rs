//! Leader election on rings and bounded-diameter networks.
//!
//! Rings are oriented: agents are listed going right, messages sent `L`
//! reach the left neighbour, which sees them arrive from its right. In a
//! [`Topology::ring`] out-port 0 is `L`, out-port 1 is `R`, in-port 0
//! holds messages from the right and in-port 1 messages from the left.
//!
//! Ids are the agents' inputs, parsed as positive integers.

mod analysis;
mod flooding;
mod lcr;
mod peterson;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::network::Network;
use crate::runtime::Topology;

pub use analysis::{
    check_interval_lemmas, check_order_lemma, check_phase_lemma, first_learners, first_learners_sampled,
    message_sources, message_stats, schedule_independence, shuffled_ids, track_intervals, vector_clocks,
    FirstLearners, IntervalState, Intervals, LemmaViolation, MessageStats,
};
pub use flooding::{flooding, Flooding, FloodingAgent, FloodMsg};
pub use lcr::{lcr, lcr_prime, Lcr, LcrAgent, LcrMsg, LcrPrime, LcrPrimeAgent};
pub use peterson::{
    endgame_plan, loop_outcome, p2, p2_prime, Halving, Learning, LoopOutcome, P2Agent, P2Msg, P2Prime,
    P2PrimeAgent, Plan, Status, P2,
};

pub const OUT_L: usize = 0;
pub const OUT_R: usize = 1;
pub const FROM_R: usize = 0;
pub const FROM_L: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    L,
    R,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::L => Side::R,
            Side::R => Side::L,
        }
    }

    pub fn out_port(self) -> usize {
        match self {
            Side::L => OUT_L,
            Side::R => OUT_R,
        }
    }

    /// Side a message on this in-port came from.
    pub fn of_in_port(port: usize) -> Side {
        if port == FROM_R {
            Side::R
        } else {
            Side::L
        }
    }

    pub fn in_port(self) -> usize {
        match self {
            Side::R => FROM_R,
            Side::L => FROM_L,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::L => "L",
            Side::R => "R",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElectionError {
    #[error("input {0:?} is not a positive integer id")]
    BadId(String),
    #[error("id {0} occurs twice")]
    DuplicateId(u32),
}

/// Ids of a network's agents, in agent order, checked distinct.
pub fn ring_ids(net: &Network) -> Result<Vec<u32>, ElectionError> {
    let mut seen = BTreeSet::new();
    let mut ids = Vec::with_capacity(net.len());
    for a in net.agents() {
        let id: u32 = a.input.parse().ok().filter(|&v| v > 0).ok_or_else(|| ElectionError::BadId(a.input.clone()))?;
        if !seen.insert(id) {
            return Err(ElectionError::DuplicateId(id));
        }
        ids.push(id);
    }
    Ok(ids)
}

/// Oriented ring topology with ids as inputs.
pub fn ring_topology(ids: &[u32], bidirectional: bool) -> Topology {
    let inputs: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    let net = if bidirectional {
        Network::bi_ring(ring_name(ids, bidirectional), &inputs, "1")
    } else {
        Network::uni_ring(ring_name(ids, bidirectional), &inputs, "1")
    }
    .expect("rings of two or more agents are valid networks");
    Topology::ring(&net, bidirectional)
}

pub fn ring_name(ids: &[u32], bidirectional: bool) -> String {
    let body: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    format!("{}[{}]", if bidirectional { "bi" } else { "uni" }, body.join(","))
}

/// What an agent has learned about the ring: the ids it has heard of going
/// right and going left from itself, and the whole ring once the two ends
/// meet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RingInfo {
    right: Vec<u32>,
    left: Vec<u32>,
    ring: Option<Vec<u32>>,
}

impl RingInfo {
    pub fn own(id: u32) -> RingInfo {
        RingInfo { right: vec![id], left: vec![id], ring: None }
    }

    pub fn id(&self) -> u32 {
        self.right[0]
    }

    /// Ids going right; `right()[0]` is the holder's own id.
    pub fn right(&self) -> &[u32] {
        &self.right
    }

    pub fn left(&self) -> &[u32] {
        &self.left
    }

    /// The whole ring going right from the holder, once known.
    pub fn ring(&self) -> Option<&[u32]> {
        self.ring.as_deref()
    }

    pub fn knows_all(&self) -> bool {
        self.ring.is_some()
    }

    pub fn ids(&self) -> BTreeSet<u32> {
        match &self.ring {
            Some(r) => r.iter().copied().collect(),
            None => self.right.iter().chain(&self.left).copied().collect(),
        }
    }

    pub fn max_known(&self) -> u32 {
        self.ids().into_iter().max().unwrap()
    }

    /// Number of facts carried: one per (offset, id) and one for the size.
    pub fn atoms(&self) -> usize {
        match &self.ring {
            Some(r) => r.len() + 1,
            None => self.right.len() + self.left.len() - 1,
        }
    }

    /// Merge what the right neighbour knew when it sent `msg`.
    pub fn learn_from_right(&mut self, msg: &RingInfo) {
        if self.ring.is_some() {
            return;
        }
        if let Some(r) = &msg.ring {
            // My right neighbour's ring, seen one step to the left.
            let n = r.len();
            self.ring = Some((0..n).map(|j| r[(j + n - 1) % n]).collect());
            return;
        }
        let mut right = vec![self.id()];
        right.extend_from_slice(&msg.right);
        if right.len() > self.right.len() {
            self.right = right;
        }
        if msg.left.len() > self.left.len() {
            self.left = msg.left[1..].to_vec();
        }
        self.close();
    }

    pub fn learn_from_left(&mut self, msg: &RingInfo) {
        if self.ring.is_some() {
            return;
        }
        if let Some(r) = &msg.ring {
            let n = r.len();
            self.ring = Some((0..n).map(|j| r[(j + 1) % n]).collect());
            return;
        }
        let mut left = vec![self.id()];
        left.extend_from_slice(&msg.left);
        if left.len() > self.left.len() {
            self.left = left;
        }
        if msg.right.len() > self.right.len() {
            self.right = msg.right[1..].to_vec();
        }
        self.close();
    }

    /// With distinct ids the ring closes as soon as an id shows up on both
    /// sides, or the holder's own id comes back.
    fn close(&mut self) {
        let mut size = None;
        if let Some(a) = self.right.iter().skip(1).position(|&v| v == self.id()) {
            size = Some(a + 1);
        }
        if let Some(b) = self.left.iter().skip(1).position(|&v| v == self.id()) {
            size = size.or(Some(b + 1));
        }
        if size.is_none() {
            'outer: for (a, v) in self.right.iter().enumerate().skip(1) {
                for (b, w) in self.left.iter().enumerate().skip(1) {
                    if v == w {
                        size = Some(a + b);
                        break 'outer;
                    }
                }
            }
        }
        if let Some(n) = size {
            let ring = (0..n)
                .map(|j| if j < self.right.len() { self.right[j] } else { self.left[n - j] })
                .collect();
            self.ring = Some(ring);
        }
    }
}
