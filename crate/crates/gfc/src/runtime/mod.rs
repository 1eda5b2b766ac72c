//! Deterministic message-passing simulator.
//!
//! Agents talk over ports. An out-port of one agent is wired to an in-port of
//! a neighbour; each out-port is a channel holding in-flight messages.
//! Delivery moves a message from its channel into the receiver's queue for
//! that in-port, and the receiver later processes it. A run is quiescent
//! when every channel is empty and no agent is willing to process anything
//! it has queued.

mod pggc;
mod view;

use std::collections::VecDeque;
use std::fmt::{self, Debug, Write as _};
use std::hash::Hash;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::network::{Network, Value};

pub use pggc::{pg_gc, PgGc, PgGcAgent, PgGcMsg};
pub use view::{
    full_information, transcript, FullInfo, FullInfoAgent, KnowledgeFragment, LocalInfo, ViewMsg,
};

/// Payload carried by a protocol's messages.
pub trait Message: Clone + Debug + PartialEq + Eq + Hash + Send + Sync + 'static {
    /// Short tag printed in traces.
    fn kind(&self) -> &'static str;
    /// Size proxy printed as `bytes=` in traces.
    fn size(&self) -> usize;
}

/// Which queue an agent is willing to take its next message from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Accept {
    Any,
    Port(usize),
    Nothing,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Outgoing<M> {
    pub port: usize,
    pub msg: M,
}

impl<M> Outgoing<M> {
    pub fn new(port: usize, msg: M) -> Self {
        Outgoing { port, msg }
    }
}

/// One agent's program.
pub trait Program: Clone + Debug + Send {
    type Msg: Message;
    fn start(&mut self) -> Vec<Outgoing<Self::Msg>>;
    fn accepts(&self) -> Accept;
    fn on_message(&mut self, port: usize, msg: Self::Msg) -> Vec<Outgoing<Self::Msg>>;
    /// The value of the global function once the agent knows it.
    fn decided(&self) -> Option<Value> {
        None
    }
    /// Told that a send it just made was withheld by a counterfactual
    /// deviation; the agent's record should show it was never sent.
    fn withheld(&mut self, _port: usize, _msg: &Self::Msg) {}
    /// Synchronous runs only: the agent wants to act at the end of every
    /// round whether or not it received anything.
    fn wants_tick(&self) -> bool {
        false
    }
    fn tick(&mut self, _round: usize) -> Vec<Outgoing<Self::Msg>> {
        Vec::new()
    }
}

/// Factory for per-agent programs.
pub trait Protocol: Sync {
    type Program: Program;
    fn name(&self) -> String;
    fn spawn(&self, ctx: &AgentContext) -> Self::Program;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OutPort {
    pub name: String,
    pub weight: String,
    /// The neighbour on this port also sends to us.
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InPort {
    pub name: String,
    pub bidirectional: bool,
}

/// Everything an agent knows before the run starts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentContext {
    pub input: String,
    pub out_ports: Vec<OutPort>,
    pub in_ports: Vec<InPort>,
}

/// Port wiring of a network.
#[derive(Debug, Clone)]
pub struct Topology {
    name: String,
    ids: Vec<u32>,
    contexts: Vec<AgentContext>,
    /// `wires[a][p] = (b, q)`: out-port `p` of `a` feeds in-port `q` of `b`.
    wires: Vec<Vec<(usize, usize)>>,
}

impl Topology {
    /// One port per edge; names follow the edge order of the network.
    pub fn from_network(net: &Network) -> Topology {
        let n = net.len();
        let mut contexts = Vec::with_capacity(n);
        let mut wires = Vec::with_capacity(n);
        let in_index = |dst: usize, src: usize| net.in_edges(dst).position(|e| e.src == src).unwrap();
        for i in 0..n {
            let mut out_ports = Vec::new();
            let mut w = Vec::new();
            for (k, e) in net.out_edges(i).enumerate() {
                out_ports.push(OutPort {
                    name: format!("o{}", k + 1),
                    weight: e.weight.clone(),
                    bidirectional: net.has_edge(e.dst, i),
                });
                w.push((e.dst, in_index(e.dst, i)));
            }
            let in_ports = net
                .in_edges(i)
                .enumerate()
                .map(|(k, e)| InPort { name: format!("i{}", k + 1), bidirectional: net.has_edge(i, e.src) })
                .collect();
            contexts.push(AgentContext { input: net.input(i).to_string(), out_ports, in_ports });
            wires.push(w);
        }
        Topology {
            name: net.name().to_string(),
            ids: net.agents().iter().map(|a| a.id).collect(),
            contexts,
            wires,
        }
    }

    /// Oriented ring over the agents of `net` in order; agent `k`'s left
    /// neighbour is `k-1`. Out-port 0 is `L`; a bidirectional ring also has
    /// out-port 1 named `R`. In-ports are named after the side a message
    /// comes from: in-port 0 is `R`, in-port 1 is `L`. Two-agent rings keep
    /// separate left and right channels.
    pub fn ring(net: &Network, bidirectional: bool) -> Topology {
        let n = net.len();
        let mut contexts = Vec::with_capacity(n);
        let mut wires = Vec::with_capacity(n);
        for k in 0..n {
            let left = (k + n - 1) % n;
            let right = (k + 1) % n;
            let lw = net.weight(k, left).unwrap_or("1").to_string();
            let mut out_ports = vec![OutPort { name: "L".into(), weight: lw, bidirectional }];
            let mut w = vec![(left, 0)];
            let mut in_ports = vec![InPort { name: "R".into(), bidirectional }];
            if bidirectional {
                let rw = net.weight(k, right).unwrap_or("1").to_string();
                out_ports.push(OutPort { name: "R".into(), weight: rw, bidirectional });
                w.push((right, 1));
                in_ports.push(InPort { name: "L".into(), bidirectional });
            }
            contexts.push(AgentContext { input: net.input(k).to_string(), out_ports, in_ports });
            wires.push(w);
        }
        Topology {
            name: net.name().to_string(),
            ids: net.agents().iter().map(|a| a.id).collect(),
            contexts,
            wires,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rename(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, agent: usize) -> u32 {
        self.ids[agent]
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn context(&self, agent: usize) -> &AgentContext {
        &self.contexts[agent]
    }

    /// Receiver and receiving in-port of an out-port.
    pub fn wire(&self, agent: usize, port: usize) -> (usize, usize) {
        self.wires[agent][port]
    }

    /// Sender and sending out-port feeding an in-port.
    pub fn source(&self, agent: usize, in_port: usize) -> (usize, usize) {
        for (a, ports) in self.wires.iter().enumerate() {
            for (p, &(b, q)) in ports.iter().enumerate() {
                if b == agent && q == in_port {
                    return (a, p);
                }
            }
        }
        panic!("in-port {in_port} of agent {agent} is not wired")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Lock-step rounds: deliver everything, then everyone processes.
    Sync,
    /// One seeded random delivery or processing step at a time.
    Async { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheduler {
    pub mode: Mode,
    /// Deliver each channel in send order.
    pub fifo: bool,
    /// In async mode, the longest an enabled action may be postponed.
    pub fairness: usize,
}

impl Scheduler {
    pub fn sync() -> Scheduler {
        Scheduler { mode: Mode::Sync, fifo: true, fairness: 0 }
    }

    pub fn fifo_async(seed: u64) -> Scheduler {
        Scheduler { mode: Mode::Async { seed }, fifo: true, fairness: 64 }
    }

    pub fn unordered_async(seed: u64) -> Scheduler {
        Scheduler { mode: Mode::Async { seed }, fifo: false, fairness: 64 }
    }
}

/// Clock-free entry of an agent's perfect-recall log.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LocalEvent<M> {
    Recv { port: usize, msg: M },
    Send { port: usize, msg: M },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Send { step: usize, src: usize, dst: usize, kind: &'static str, bytes: usize },
    Deliver { step: usize, src: usize, dst: usize },
    Process { step: usize, agent: usize, port: usize },
    Learn { step: usize, agent: usize, value: Value },
}

/// Withhold the sends an agent makes on `port` at its `activation`-th step
/// (0 is the start, `k` the `k`-th processed message).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Withhold {
    pub agent: usize,
    pub activation: usize,
    pub port: usize,
}

#[derive(Debug, Clone)]
pub struct Run<P: Program> {
    pub topology: Topology,
    pub scheduler: Scheduler,
    pub protocol: String,
    pub events: Vec<Event>,
    /// Per agent: the log, and the step at which each entry happened.
    pub logs: Vec<Vec<LocalEvent<P::Msg>>>,
    pub stamps: Vec<Vec<usize>>,
    /// Per agent: the value it settled on and when.
    pub learned: Vec<Option<(usize, Value)>>,
    pub programs: Vec<P>,
    pub steps: usize,
    /// Messages still queued but never processed at quiescence.
    pub unprocessed: usize,
}

impl<P: Program> Run<P> {
    pub fn messages(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Send { .. })).count()
    }

    pub fn deliveries(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Deliver { .. })).count()
    }

    pub fn bytes(&self) -> usize {
        self.events
            .iter()
            .map(|e| if let Event::Send { bytes, .. } = e { *bytes } else { 0 })
            .sum()
    }

    /// Number of messages `agent` processed.
    pub fn processed(&self, agent: usize) -> usize {
        self.logs[agent].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count()
    }

    /// Trace in the line format used for golden files.
    pub fn trace(&self) -> String {
        let t = &self.topology;
        let mut s = String::new();
        for e in &self.events {
            match e {
                Event::Send { step, src, dst, kind, bytes } => {
                    let _ = writeln!(s, "STEP {step} SEND {}->{} bytes={bytes} kind={kind}", t.id(*src), t.id(*dst));
                }
                Event::Deliver { step, src, dst } => {
                    let _ = writeln!(s, "STEP {step} DELIVER {}->{}", t.id(*src), t.id(*dst));
                }
                Event::Learn { step, agent, value } => {
                    let _ = writeln!(s, "STEP {step} LEARN {} f={value}", t.id(*agent));
                }
                Event::Process { .. } => {}
            }
        }
        let _ = writeln!(s, "END steps={} msgs={}", self.steps, self.messages());
        s
    }
}

#[derive(Debug, Error)]
pub enum RunError<P: Program> {
    #[error("step budget of {budget} exhausted before quiescence")]
    BudgetExhausted { budget: usize, partial: Box<Run<P>> },
}

impl<P: Program> RunError<P> {
    pub fn partial(&self) -> &Run<P> {
        match self {
            RunError::BudgetExhausted { partial, .. } => partial,
        }
    }
}

struct InFlight<M> {
    msg: M,
    since: usize,
}

struct Engine<P: Program> {
    topo: Topology,
    programs: Vec<P>,
    channels: Vec<Vec<VecDeque<InFlight<P::Msg>>>>,
    inboxes: Vec<Vec<VecDeque<(P::Msg, usize)>>>,
    events: Vec<Event>,
    logs: Vec<Vec<LocalEvent<P::Msg>>>,
    stamps: Vec<Vec<usize>>,
    learned: Vec<Option<(usize, Value)>>,
    activations: Vec<usize>,
    withhold: Option<Withhold>,
}

impl<P: Program> Engine<P> {
    fn new<Q: Protocol<Program = P>>(topo: &Topology, protocol: &Q, withhold: Option<Withhold>) -> Self {
        let n = topo.len();
        Engine {
            programs: (0..n).map(|a| protocol.spawn(topo.context(a))).collect(),
            channels: (0..n).map(|a| (0..topo.context(a).out_ports.len()).map(|_| VecDeque::new()).collect()).collect(),
            inboxes: (0..n).map(|a| (0..topo.context(a).in_ports.len()).map(|_| VecDeque::new()).collect()).collect(),
            events: Vec::new(),
            logs: vec![Vec::new(); n],
            stamps: vec![Vec::new(); n],
            learned: vec![None; n],
            activations: vec![0; n],
            withhold,
            topo: topo.clone(),
        }
    }

    fn emit(&mut self, step: usize, agent: usize, sends: Vec<Outgoing<P::Msg>>) {
        let activation = self.activations[agent];
        self.activations[agent] += 1;
        for out in sends {
            if let Some(w) = self.withhold {
                if w.agent == agent && w.activation == activation && w.port == out.port {
                    self.programs[agent].withheld(out.port, &out.msg);
                    continue;
                }
            }
            let (dst, _) = self.topo.wire(agent, out.port);
            self.events.push(Event::Send {
                step,
                src: agent,
                dst,
                kind: out.msg.kind(),
                bytes: out.msg.size(),
            });
            self.logs[agent].push(LocalEvent::Send { port: out.port, msg: out.msg.clone() });
            self.stamps[agent].push(step);
            self.channels[agent][out.port].push_back(InFlight { msg: out.msg, since: step });
        }
        if self.learned[agent].is_none() {
            if let Some(v) = self.programs[agent].decided() {
                self.events.push(Event::Learn { step, agent, value: v.clone() });
                self.learned[agent] = Some((step, v));
            }
        }
    }

    fn start(&mut self) {
        for a in 0..self.topo.len() {
            let sends = self.programs[a].start();
            self.emit(0, a, sends);
        }
    }

    fn deliver(&mut self, step: usize, agent: usize, port: usize, index: usize) {
        let item = self.channels[agent][port].remove(index).unwrap();
        let (dst, in_port) = self.topo.wire(agent, port);
        self.events.push(Event::Deliver { step, src: agent, dst });
        self.inboxes[dst][in_port].push_back((item.msg, step));
    }

    /// In-port the agent would process from now, if any.
    fn ready(&self, agent: usize) -> Option<usize> {
        match self.programs[agent].accepts() {
            Accept::Nothing => None,
            Accept::Port(p) => (!self.inboxes[agent][p].is_empty()).then_some(p),
            Accept::Any => {
                // Oldest delivery first, ties by port.
                (0..self.inboxes[agent].len())
                    .filter(|&p| !self.inboxes[agent][p].is_empty())
                    .min_by_key(|&p| (self.inboxes[agent][p][0].1, p))
            }
        }
    }

    fn process(&mut self, step: usize, agent: usize, port: usize) {
        let (msg, _) = self.inboxes[agent][port].pop_front().unwrap();
        self.events.push(Event::Process { step, agent, port });
        self.logs[agent].push(LocalEvent::Recv { port, msg: msg.clone() });
        self.stamps[agent].push(step);
        let sends = self.programs[agent].on_message(port, msg);
        self.emit(step, agent, sends);
    }

    fn in_flight(&self) -> usize {
        self.channels.iter().flatten().map(|c| c.len()).sum()
    }

    fn quiescent(&self) -> bool {
        self.in_flight() == 0 && (0..self.topo.len()).all(|a| self.ready(a).is_none())
    }

    fn ticking(&self) -> bool {
        self.programs.iter().any(|p| p.wants_tick())
    }

    fn finish<Q: Protocol<Program = P>>(self, protocol: &Q, scheduler: Scheduler, steps: usize) -> Run<P> {
        let unprocessed = self.inboxes.iter().flatten().map(|q| q.len()).sum::<usize>() + self.in_flight();
        Run {
            topology: self.topo,
            scheduler,
            protocol: protocol.name(),
            events: self.events,
            logs: self.logs,
            stamps: self.stamps,
            learned: self.learned,
            programs: self.programs,
            steps,
            unprocessed,
        }
    }
}

/// Runs a protocol to quiescence. The budget counts rounds in synchronous
/// mode and individual actions in asynchronous mode.
pub fn run_protocol<Q: Protocol>(
    topo: &Topology,
    protocol: &Q,
    scheduler: Scheduler,
    budget: usize,
) -> Result<Run<Q::Program>, RunError<Q::Program>> {
    run_with(topo, protocol, scheduler, budget, None)
}

/// [`run_protocol`] with one withheld send.
pub fn run_with<Q: Protocol>(
    topo: &Topology,
    protocol: &Q,
    scheduler: Scheduler,
    budget: usize,
    withhold: Option<Withhold>,
) -> Result<Run<Q::Program>, RunError<Q::Program>> {
    let mut engine = Engine::new(topo, protocol, withhold);
    engine.start();
    match scheduler.mode {
        Mode::Sync => run_sync(engine, protocol, scheduler, budget),
        Mode::Async { seed } => run_async(engine, protocol, scheduler, budget, seed),
    }
}

fn run_sync<Q: Protocol>(
    mut engine: Engine<Q::Program>,
    protocol: &Q,
    scheduler: Scheduler,
    budget: usize,
) -> Result<Run<Q::Program>, RunError<Q::Program>> {
    let mut round = 0;
    while !engine.quiescent() || engine.ticking() {
        if round == budget {
            let partial = Box::new(engine.finish(protocol, scheduler, round));
            return Err(RunError::BudgetExhausted { budget, partial });
        }
        round += 1;
        let n = engine.topo.len();
        for a in 0..n {
            for p in 0..engine.channels[a].len() {
                while !engine.channels[a][p].is_empty() {
                    engine.deliver(round, a, p, 0);
                }
            }
        }
        // Everyone works on what was delivered at the start of the round;
        // messages sent during the round wait in their channels.
        for a in 0..n {
            while let Some(p) = engine.ready(a) {
                engine.process(round, a, p);
            }
        }
        for a in 0..n {
            if engine.programs[a].wants_tick() {
                let sends = engine.programs[a].tick(round);
                engine.emit(round, a, sends);
            }
        }
    }
    Ok(engine.finish(protocol, scheduler, round))
}

#[derive(Clone, Copy)]
enum Action {
    Deliver { agent: usize, port: usize, index: usize },
    Process { agent: usize, port: usize },
}

fn run_async<Q: Protocol>(
    mut engine: Engine<Q::Program>,
    protocol: &Q,
    scheduler: Scheduler,
    budget: usize,
    seed: u64,
) -> Result<Run<Q::Program>, RunError<Q::Program>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = 0;
    loop {
        let mut actions = Vec::new();
        let mut overdue: Option<(usize, Action)> = None;
        let mut note = |since: usize, act: Action, actions: &mut Vec<Action>| {
            if scheduler.fairness > 0 && step >= since + scheduler.fairness && overdue.is_none_or(|(s, _)| since < s) {
                overdue = Some((since, act));
            }
            actions.push(act);
        };
        for a in 0..engine.topo.len() {
            for p in 0..engine.channels[a].len() {
                let chan = &engine.channels[a][p];
                let upto = if scheduler.fifo { chan.len().min(1) } else { chan.len() };
                for index in 0..upto {
                    note(chan[index].since, Action::Deliver { agent: a, port: p, index }, &mut actions);
                }
            }
            if let Some(p) = engine.ready(a) {
                let since = engine.inboxes[a][p][0].1;
                note(since, Action::Process { agent: a, port: p }, &mut actions);
            }
        }
        if actions.is_empty() {
            return Ok(engine.finish(protocol, scheduler, step));
        }
        if step == budget {
            let partial = Box::new(engine.finish(protocol, scheduler, step));
            return Err(RunError::BudgetExhausted { budget, partial });
        }
        step += 1;
        let act = match overdue {
            Some((_, act)) => act,
            None => actions[rng.gen_range(0..actions.len())],
        };
        match act {
            Action::Deliver { agent, port, index } => engine.deliver(step, agent, port, index),
            Action::Process { agent, port } => engine.process(step, agent, port),
        }
    }
}

impl fmt::Display for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            Mode::Sync => write!(f, "sync"),
            Mode::Async { seed } => write!(
                f,
                "async seed={seed} fifo={} fairness={}",
                if self.fifo { "on" } else { "off" },
                self.fairness
            ),
        }
    }
}
