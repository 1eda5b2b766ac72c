//! Election by flooding the largest id for a known number of rounds.
//! Synchronous runs only: agents count rounds on the clock, including
//! rounds in which nothing arrives.

use crate::network::Value;
use crate::runtime::{Accept, AgentContext, Message, Outgoing, Program, Protocol};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FloodMsg(pub u32);

impl Message for FloodMsg {
    fn kind(&self) -> &'static str {
        "max"
    }

    fn size(&self) -> usize {
        1
    }
}

/// Floods for `d` rounds, which is enough on networks of diameter at most
/// `d`. An agent only passes the maximum on when it has just improved.
#[derive(Debug, Clone, Copy)]
pub struct Flooding {
    rounds: usize,
}

pub fn flooding(d: usize) -> Flooding {
    Flooding { rounds: d }
}

impl Protocol for Flooding {
    type Program = FloodingAgent;

    fn name(&self) -> String {
        format!("flooding({})", self.rounds)
    }

    fn spawn(&self, ctx: &AgentContext) -> FloodingAgent {
        let id = ctx.input.parse().unwrap_or_else(|_| panic!("flooding needs integer ids, got {:?}", ctx.input));
        FloodingAgent {
            id,
            max: id,
            rounds: self.rounds,
            ports: ctx.out_ports.len(),
            improved: false,
            leader: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FloodingAgent {
    id: u32,
    max: u32,
    rounds: usize,
    ports: usize,
    improved: bool,
    leader: Option<u32>,
}

impl FloodingAgent {
    pub fn is_leader(&self) -> bool {
        self.leader == Some(self.id)
    }

    fn flood(&self) -> Vec<Outgoing<FloodMsg>> {
        (0..self.ports).map(|p| Outgoing::new(p, FloodMsg(self.max))).collect()
    }
}

impl Program for FloodingAgent {
    type Msg = FloodMsg;

    fn start(&mut self) -> Vec<Outgoing<FloodMsg>> {
        if self.rounds == 0 {
            return Vec::new();
        }
        self.flood()
    }

    fn accepts(&self) -> Accept {
        if self.leader.is_some() {
            Accept::Nothing
        } else {
            Accept::Any
        }
    }

    fn on_message(&mut self, _port: usize, msg: FloodMsg) -> Vec<Outgoing<FloodMsg>> {
        if msg.0 > self.max {
            self.max = msg.0;
            self.improved = true;
        }
        Vec::new()
    }

    fn wants_tick(&self) -> bool {
        self.rounds > 0 && self.leader.is_none()
    }

    fn tick(&mut self, round: usize) -> Vec<Outgoing<FloodMsg>> {
        if round >= self.rounds {
            self.leader = Some(self.max);
            return Vec::new();
        }
        let out = if self.improved { self.flood() } else { Vec::new() };
        self.improved = false;
        out
    }

    fn decided(&self) -> Option<Value> {
        self.leader.map(|v| v.to_string())
    }
}
