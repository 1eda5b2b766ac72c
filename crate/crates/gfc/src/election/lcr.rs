//! Election on unidirectional rings. Every agent sends left and hears from
//! its right.

use super::{RingInfo, FROM_R, OUT_L};
use crate::network::Value;
use crate::runtime::{Accept, AgentContext, Message, Outgoing, Program, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LcrMsg {
    Id(u32),
    Leader(u32),
}

impl Message for LcrMsg {
    fn kind(&self) -> &'static str {
        match self {
            LcrMsg::Id(_) => "id",
            LcrMsg::Leader(_) => "leader",
        }
    }

    fn size(&self) -> usize {
        1
    }
}

fn parse_id(ctx: &AgentContext) -> u32 {
    ctx.input.parse().unwrap_or_else(|_| panic!("ring election needs integer ids, got {:?}", ctx.input))
}

/// Ids travel left and are swallowed by larger ones; the agent whose id
/// comes back is the leader and sends an announcement round the ring.
#[derive(Debug, Clone, Copy, Default)]
pub struct Lcr;

pub fn lcr() -> Lcr {
    Lcr
}

impl Protocol for Lcr {
    type Program = LcrAgent;

    fn name(&self) -> String {
        "lcr".into()
    }

    fn spawn(&self, ctx: &AgentContext) -> LcrAgent {
        let id = parse_id(ctx);
        LcrAgent { id, maxid: id, leader: None, done: false }
    }
}

#[derive(Debug, Clone)]
pub struct LcrAgent {
    id: u32,
    maxid: u32,
    leader: Option<u32>,
    done: bool,
}

impl LcrAgent {
    pub fn leader(&self) -> Option<u32> {
        self.leader
    }
}

impl Program for LcrAgent {
    type Msg = LcrMsg;

    fn start(&mut self) -> Vec<Outgoing<LcrMsg>> {
        vec![Outgoing::new(OUT_L, LcrMsg::Id(self.id))]
    }

    fn accepts(&self) -> Accept {
        if self.done {
            Accept::Nothing
        } else {
            Accept::Port(FROM_R)
        }
    }

    fn on_message(&mut self, _port: usize, msg: LcrMsg) -> Vec<Outgoing<LcrMsg>> {
        match msg {
            LcrMsg::Id(v) if v == self.id => {
                self.leader = Some(self.id);
                vec![Outgoing::new(OUT_L, LcrMsg::Leader(self.id))]
            }
            LcrMsg::Id(v) if v > self.maxid => {
                self.maxid = v;
                vec![Outgoing::new(OUT_L, LcrMsg::Id(v))]
            }
            LcrMsg::Id(_) => Vec::new(),
            LcrMsg::Leader(v) => {
                self.done = true;
                if self.leader == Some(v) {
                    // The announcement is back home.
                    return Vec::new();
                }
                self.leader = Some(v);
                vec![Outgoing::new(OUT_L, LcrMsg::Leader(v))]
            }
        }
    }

    fn decided(&self) -> Option<Value> {
        self.leader.map(|v| v.to_string())
    }
}

/// The same election, but messages carry everything the sender knows and
/// nobody sends what its left neighbour already has.
#[derive(Debug, Clone, Copy, Default)]
pub struct LcrPrime;

pub fn lcr_prime() -> LcrPrime {
    LcrPrime
}

impl Message for RingInfo {
    fn kind(&self) -> &'static str {
        "info"
    }

    fn size(&self) -> usize {
        self.atoms()
    }
}

impl Protocol for LcrPrime {
    type Program = LcrPrimeAgent;

    fn name(&self) -> String {
        "lcr_prime".into()
    }

    fn spawn(&self, ctx: &AgentContext) -> LcrPrimeAgent {
        LcrPrimeAgent { info: RingInfo::own(parse_id(ctx)), announced: false, done: false }
    }
}

#[derive(Debug, Clone)]
pub struct LcrPrimeAgent {
    info: RingInfo,
    /// Sent a message after its own id came back.
    announced: bool,
    done: bool,
}

impl LcrPrimeAgent {
    pub fn info(&self) -> &RingInfo {
        &self.info
    }

    /// Knows the ring and that its left neighbour, the last agent to hear
    /// anything from it, holds the maximum.
    fn left_is_leader(&self) -> bool {
        self.info.ring().is_some_and(|r| r[r.len() - 1] == self.info.max_known())
    }

    fn finished(&self) -> bool {
        self.info.knows_all() && (self.announced || self.left_is_leader())
    }
}

impl Program for LcrPrimeAgent {
    type Msg = RingInfo;

    fn start(&mut self) -> Vec<Outgoing<RingInfo>> {
        vec![Outgoing::new(OUT_L, self.info.clone())]
    }

    fn accepts(&self) -> Accept {
        if self.done {
            Accept::Nothing
        } else {
            Accept::Port(FROM_R)
        }
    }

    fn on_message(&mut self, _port: usize, msg: RingInfo) -> Vec<Outgoing<RingInfo>> {
        let maxid = self.info.max_known();
        let msg_max = msg.max_known();
        self.info.learn_from_right(&msg);
        // My own id is in the message once I know the whole ring: on a
        // one-way ring nothing else closes it.
        let own_back = self.info.knows_all();
        if self.finished() {
            self.done = true;
            return Vec::new();
        }
        let mut out = Vec::new();
        if own_back || msg_max > maxid {
            if own_back {
                self.announced = true;
            }
            out.push(Outgoing::new(OUT_L, self.info.clone()));
        }
        if self.finished() {
            self.done = true;
        }
        out
    }

    fn decided(&self) -> Option<Value> {
        self.info.knows_all().then(|| self.info.max_known().to_string())
    }
}
