//! Election on bidirectional rings by repeated halving of the active set.
//!
//! While active an agent alternates: process from the right, then from the
//! left. An active agent stays active while its id beats the ids of the
//! nearest active agents on both sides; a passive agent relays what it
//! processes to the other side.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use super::analysis::{message_sources, vector_clocks};
use super::{ring_topology, RingInfo, Side, FROM_L, FROM_R};
use crate::network::Value;
use crate::runtime::{run_protocol, Accept, AgentContext, LocalEvent, Message, Outgoing, Program, Protocol, Scheduler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Active,
    Passive,
    Leader,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum P2Msg {
    Id(u32),
    Leader(u32),
}

impl Message for P2Msg {
    fn kind(&self) -> &'static str {
        match self {
            P2Msg::Id(_) => "id",
            P2Msg::Leader(_) => "leader",
        }
    }

    fn size(&self) -> usize {
        1
    }
}

fn parse_id(ctx: &AgentContext) -> u32 {
    assert_eq!(ctx.out_ports.len(), 2, "bidirectional ring expected");
    ctx.input.parse().unwrap_or_else(|_| panic!("ring election needs integer ids, got {:?}", ctx.input))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct P2;

pub fn p2() -> P2 {
    P2
}

impl Protocol for P2 {
    type Program = P2Agent;

    fn name(&self) -> String {
        "p2".into()
    }

    fn spawn(&self, ctx: &AgentContext) -> P2Agent {
        P2Agent { id: parse_id(ctx), status: Status::Active, wl: false, done: false, leader: None, history: Vec::new() }
    }
}

#[derive(Debug, Clone)]
pub struct P2Agent {
    id: u32,
    status: Status,
    /// Waiting to process from the left.
    wl: bool,
    done: bool,
    leader: Option<u32>,
    history: Vec<bool>,
}

impl P2Agent {
    pub fn status(&self) -> Status {
        self.status
    }
}

/// Agents of the halving protocols, as the lemma checkers see them.
pub trait Halving: Program {
    fn id(&self) -> u32;
    /// Whether the agent was active (or leader) after each message it
    /// processed.
    fn active_history(&self) -> &[bool];
}

impl Halving for P2Agent {
    fn id(&self) -> u32 {
        self.id
    }

    fn active_history(&self) -> &[bool] {
        &self.history
    }
}

impl Program for P2Agent {
    type Msg = P2Msg;

    fn start(&mut self) -> Vec<Outgoing<P2Msg>> {
        vec![Outgoing::new(Side::L.out_port(), P2Msg::Id(self.id))]
    }

    fn accepts(&self) -> Accept {
        match (self.done, self.wl) {
            (true, _) => Accept::Nothing,
            (false, false) => Accept::Port(FROM_R),
            (false, true) => Accept::Port(FROM_L),
        }
    }

    fn on_message(&mut self, port: usize, msg: P2Msg) -> Vec<Outgoing<P2Msg>> {
        let out = self.step(port, msg);
        self.history.push(self.status != Status::Passive);
        out
    }

    fn decided(&self) -> Option<Value> {
        self.leader.map(|v| v.to_string())
    }
}

impl P2Agent {
    fn step(&mut self, port: usize, msg: P2Msg) -> Vec<Outgoing<P2Msg>> {
        let from = Side::of_in_port(port);
        self.wl = from == Side::R;
        // Replies go back the way the message came; relays go on through.
        let back = from.out_port();
        let on = from.flip().out_port();
        match msg {
            P2Msg::Leader(v) => {
                self.done = true;
                self.leader = Some(v);
                vec![Outgoing::new(on, P2Msg::Leader(v))]
            }
            P2Msg::Id(v) if v == self.id => {
                self.status = Status::Leader;
                self.leader = Some(self.id);
                self.done = true;
                vec![Outgoing::new(back, P2Msg::Leader(self.id))]
            }
            P2Msg::Id(v) => match self.status {
                Status::Active if v > self.id => {
                    self.status = Status::Passive;
                    Vec::new()
                }
                Status::Active => vec![Outgoing::new(back, P2Msg::Id(self.id))],
                _ => vec![Outgoing::new(on, P2Msg::Id(v))],
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endgame {
    /// Pass the ring on to whoever would otherwise wait for it forever.
    Plan,
    /// Stop as soon as the ring is known; used to find first learners.
    Halt,
}

/// Peterson's halving with full-information messages: status is read off
/// what the agent knows, and once somebody knows the whole ring the rest
/// of the work is a planned dissemination instead of a leader message.
#[derive(Debug, Clone, Copy)]
pub struct P2Prime {
    endgame: Endgame,
}

pub fn p2_prime() -> P2Prime {
    P2Prime { endgame: Endgame::Plan }
}

impl P2Prime {
    /// The loop alone: every agent stops the moment it knows the ring.
    pub fn halting() -> P2Prime {
        P2Prime { endgame: Endgame::Halt }
    }
}

impl Protocol for P2Prime {
    type Program = P2PrimeAgent;

    fn name(&self) -> String {
        match self.endgame {
            Endgame::Plan => "p2_prime".into(),
            Endgame::Halt => "p2_prime_loop".into(),
        }
    }

    fn spawn(&self, ctx: &AgentContext) -> P2PrimeAgent {
        P2PrimeAgent {
            info: RingInfo::own(parse_id(ctx)),
            endgame: self.endgame,
            wl: false,
            processed: 0,
            learned: None,
            done: false,
            history: Vec::new(),
        }
    }
}

/// How an agent came to know the ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Learning {
    /// Messages processed, the learning one included.
    pub processed: usize,
    pub side: Side,
    pub was_active: bool,
}

#[derive(Debug, Clone)]
pub struct P2PrimeAgent {
    info: RingInfo,
    endgame: Endgame,
    wl: bool,
    processed: usize,
    learned: Option<Learning>,
    done: bool,
    history: Vec<bool>,
}

impl Halving for P2PrimeAgent {
    fn id(&self) -> u32 {
        self.info.id()
    }

    fn active_history(&self) -> &[bool] {
        &self.history
    }
}

impl P2PrimeAgent {
    pub fn info(&self) -> &RingInfo {
        &self.info
    }

    pub fn is_active(&self) -> bool {
        self.info.id() == self.info.max_known()
    }

    pub fn learned(&self) -> Option<Learning> {
        self.learned
    }

    fn send(&self, side: Side) -> Outgoing<RingInfo> {
        Outgoing::new(side.out_port(), self.info.clone())
    }

    fn on_learning(&mut self) -> Vec<Outgoing<RingInfo>> {
        self.done = true;
        if self.endgame == Endgame::Halt {
            return Vec::new();
        }
        let plan = plan_for(self.info.ring().unwrap());
        plan.sends[0].iter().map(|&side| self.send(side)).collect()
    }
}

impl Program for P2PrimeAgent {
    type Msg = RingInfo;

    fn start(&mut self) -> Vec<Outgoing<RingInfo>> {
        vec![self.send(Side::L)]
    }

    fn accepts(&self) -> Accept {
        if self.done {
            return Accept::Nothing;
        }
        Accept::Port(if self.wl { FROM_L } else { FROM_R })
    }

    fn on_message(&mut self, port: usize, msg: RingInfo) -> Vec<Outgoing<RingInfo>> {
        let out = self.step(port, msg);
        self.history.push(self.is_active());
        out
    }

    fn decided(&self) -> Option<Value> {
        self.info.knows_all().then(|| self.info.max_known().to_string())
    }
}

impl P2PrimeAgent {
    fn step(&mut self, port: usize, msg: RingInfo) -> Vec<Outgoing<RingInfo>> {
        let from = Side::of_in_port(port);
        self.processed += 1;
        let was_active = self.is_active();
        match from {
            Side::R => self.info.learn_from_right(&msg),
            Side::L => self.info.learn_from_left(&msg),
        }
        self.wl = from == Side::R;
        if self.info.knows_all() {
            self.learned = Some(Learning { processed: self.processed, side: from, was_active });
            return self.on_learning();
        }
        match (was_active, self.is_active()) {
            (true, true) => vec![self.send(from)],
            // Just lost: nothing to do until the other side reports.
            (true, false) => Vec::new(),
            _ => vec![self.send(from.flip())],
        }
    }
}

/// The dissemination plan for a ring, in positions of the ring as given.
///
/// What each agent processes in the loop does not depend on the schedule,
/// so the loop on its own ends in a fixed state: some agents know the
/// ring and every other agent waits for good on one side. The endgame
/// feeds each waiting agent the ring from exactly that side, once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub n: usize,
    /// Agents that can be first to know the ring.
    pub first: Vec<usize>,
    /// Agents that come to know the ring in the loop itself.
    pub learners: Vec<usize>,
    /// For everybody else, the side it ends up waiting on.
    pub waits: Vec<Option<Side>>,
    /// Sides each agent sends the ring to once it knows it.
    pub sends: Vec<Vec<Side>>,
}

impl Plan {
    pub fn neighbour(&self, k: usize, side: Side) -> usize {
        match side {
            Side::R => (k + 1) % self.n,
            Side::L => (k + self.n - 1) % self.n,
        }
    }

    /// Every waiting agent is fed along a chain that starts at a learner.
    pub fn complete(&self) -> bool {
        (0..self.n).all(|k| {
            let mut cur = k;
            for _ in 0..=self.n {
                match self.waits[cur] {
                    None => return true,
                    Some(z) => cur = self.neighbour(cur, z),
                }
            }
            false
        })
    }
}

/// What happens in the loop on a ring: for each position, how it learns
/// the ring if it does, the position its learning message originated
/// with, and whether some other learning causally precedes its own.
#[derive(Debug, Clone)]
pub struct LoopOutcome {
    pub learning: Vec<Option<Learning>>,
    pub origin: Vec<Option<usize>>,
    pub first: Vec<usize>,
}

pub fn loop_outcome(ids: &[u32]) -> LoopOutcome {
    let topo = ring_topology(ids, true);
    let run = run_protocol(&topo, &P2Prime::halting(), Scheduler::sync(), 10 * ids.len() * ids.len() + 100)
        .expect("the loop halts");
    let n = ids.len();
    let learning: Vec<_> = run.programs.iter().map(|p| p.learned()).collect();
    let sources = message_sources(&run);
    let clocks = vector_clocks(&run);
    // The learning event is the agent's last log entry that is a receive.
    let event = |k: usize| -> Option<usize> {
        learning[k]?;
        run.logs[k].iter().rposition(|e| matches!(e, LocalEvent::Recv { .. }))
    };
    let origin = (0..n)
        .map(|k| {
            let mut at = (k, event(k)?);
            loop {
                let (src, send_ix) = sources[at.0][at.1]?;
                let LocalEvent::Send { msg, .. } = &run.logs[src][send_ix] else { unreachable!() };
                if msg.id() == msg.max_known() {
                    return Some(src);
                }
                // A relay: the message it passed on is the one it had just
                // processed.
                let recv = run.logs[src][..send_ix].iter().rposition(|e| matches!(e, LocalEvent::Recv { .. }))?;
                at = (src, recv);
            }
        })
        .collect();
    let first = (0..n)
        .filter(|&k| {
            let Some(ek) = event(k) else { return false };
            let ck = &clocks[k][ek];
            !(0..n).any(|j| {
                j != k && event(j).is_some_and(|ej| {
                    let cj = &clocks[j][ej];
                    cj.iter().zip(ck).all(|(a, b)| a <= b) && cj != ck
                })
            })
        })
        .collect();
    LoopOutcome { learning, origin, first }
}

/// The endgame for a ring.
pub fn endgame_plan(ids: &[u32]) -> Plan {
    let n = ids.len();
    let topo = ring_topology(ids, true);
    let run = run_protocol(&topo, &P2Prime::halting(), Scheduler::sync(), 10 * n * n + 100).expect("the loop halts");
    let learners: Vec<usize> = (0..n).filter(|&k| run.programs[k].learned().is_some()).collect();
    let waits: Vec<Option<Side>> = (0..n)
        .map(|k| match run.programs[k].accepts() {
            Accept::Port(p) if run.programs[k].learned().is_none() => Some(Side::of_in_port(p)),
            _ => None,
        })
        .collect();
    let mut plan = Plan { n, first: loop_outcome(ids).first, learners, waits, sends: vec![Vec::new(); n] };
    for y in 0..n {
        if let Some(z) = plan.waits[y] {
            let x = plan.neighbour(y, z);
            plan.sends[x].push(z.flip());
        }
    }
    for s in &mut plan.sends {
        s.sort();
    }
    plan
}

/// Plans are a function of the ring; every agent of a ring computes the
/// same one, so share them.
fn plan_for(ring: &[u32]) -> Plan {
    static CACHE: OnceLock<Mutex<HashMap<Vec<u32>, Plan>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().unwrap().get(ring) {
        return p.clone();
    }
    let p = endgame_plan(ring);
    cache.lock().unwrap().insert(ring.to_vec(), p.clone());
    p
}
