//! Knowledge and belief over finite systems of runs, and a check that a
//! protocol sends a message exactly when the knowledge-based condition says
//! the message is needed.
//!
//! A system holds the runs of a protocol over a set of worlds (rank 0) and,
//! once asked for, every run in which one agent leaves out one send and
//! everybody follows the protocol afterwards (rank 1). An agent believes
//! what holds in all situations of least rank that share its local state.
//!
//! Local states are an agent's context plus its log of sends and receives.
//! Rank-0 runs are synchronous and by default every log entry carries its
//! round, so agents can reason from timing; [`Clock::Free`] drops the
//! rounds, which is the asynchronous reading.

mod ring;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;

use crate::network::{FunctionError, GlobalFunction, Network, Value};
use crate::runtime::{run_with, AgentContext, LocalEvent, Protocol, Scheduler, Topology, Withhold};

pub use ring::{distinct_id_rings, ring_universe, ring_worlds};

/// One network of a system, with the value of the function on it.
#[derive(Debug, Clone)]
pub struct World {
    pub network: Network,
    pub topology: Topology,
    pub f: Value,
    /// Agents are in ring order and ports are named `L` and `R`, so facts
    /// about positions make sense.
    pub ring: bool,
}

impl World {
    pub fn new(network: Network, topology: Topology, f: &GlobalFunction) -> Result<World, FunctionError> {
        let value = f.eval(&network)?;
        let ring = (0..topology.len()).all(|a| topology.context(a).out_ports.first().is_some_and(|p| p.name == "L"));
        Ok(World { network, topology, f: value, ring })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Clock {
    /// Logs record order only.
    Free,
    /// Logs record the step of every entry.
    Rounds,
}

/// How rank-0 runs are generated.
#[derive(Debug, Clone)]
pub struct Policy {
    /// Asynchronous seeds run on every world besides the synchronous run.
    pub seeds: Vec<u64>,
    pub clock: Clock,
    /// Budget per run, in rounds or steps.
    pub budget: usize,
}

impl Default for Policy {
    fn default() -> Self {
        Policy { seeds: Vec::new(), clock: Clock::Rounds, budget: 10_000 }
    }
}

/// A fact about the world from one agent's vantage point.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    /// The agent `offset` steps to the right has this input; negative
    /// offsets go left.
    At(i32, String),
    /// Some agent has this input.
    Has(String),
    Size(usize),
    F(Value),
}

impl Atom {
    /// The same fact seen from an agent `d` steps to the left.
    fn shift(&self, d: i32) -> Atom {
        match self {
            Atom::At(j, x) => Atom::At(j + d, x.clone()),
            other => other.clone(),
        }
    }

    fn holds(&self, world: &World, agent: usize) -> bool {
        match self {
            Atom::At(j, x) => {
                let n = world.topology.len() as i64;
                let k = (agent as i64 + *j as i64).rem_euclid(n) as usize;
                world.ring && world.topology.context(k).input == *x
            }
            Atom::Has(x) => (0..world.topology.len()).any(|k| world.topology.context(k).input == *x),
            Atom::Size(n) => world.topology.len() == *n,
            Atom::F(v) => world.f == *v,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::At(j, id) => write!(f, "at({j})={id}"),
            Atom::Has(x) => write!(f, "has({x})"),
            Atom::Size(n) => write!(f, "size={n}"),
            Atom::F(v) => write!(f, "f={v}"),
        }
    }
}

/// How far apart two agents seeing the same fact are, for a message sent on
/// an out-port with this name.
fn port_shift(name: &str) -> i32 {
    match name {
        "L" => 1,
        "R" => -1,
        _ => 0,
    }
}

/// A withheld send in one rank-0 run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DeviationKey {
    pub run: usize,
    pub agent: usize,
    pub activation: usize,
    pub port: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunRef {
    Base(usize),
    Deviation(DeviationKey),
}

/// An agent at a point of a run. `m` counts the entries of its log, so it
/// is the agent's local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Situation {
    pub run: RunRef,
    pub agent: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formula {
    KnowsValue,
    BelievesEventuallyKnows,
    SendCondition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbFormulaResult {
    pub formula: Formula,
    pub value: bool,
    /// Situations that decide the value: the believed-possible ones that
    /// refute the eventuality for a send condition, the ones that disagree
    /// on the value for knowledge.
    pub witnesses: Vec<Situation>,
}

type StateId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node<M> {
    Root(AgentContext),
    Entry(LocalEvent<M>, Option<usize>),
}

/// Local states as a prefix tree of logs.
#[derive(Debug)]
struct States<M: Eq + std::hash::Hash> {
    ids: HashMap<(StateId, Node<M>), StateId>,
}

impl<M: Clone + Eq + std::hash::Hash> States<M> {
    fn intern(&mut self, parent: StateId, node: Node<M>) -> StateId {
        let next = self.ids.len() as StateId;
        *self.ids.entry((parent, node)).or_insert(next)
    }

    /// State ids of every prefix of a log.
    fn path(&mut self, ctx: &AgentContext, log: &[LocalEvent<M>], stamps: &[usize], clock: Clock) -> Vec<StateId> {
        let mut out = Vec::with_capacity(log.len() + 1);
        let mut cur = self.intern(StateId::MAX, Node::Root(ctx.clone()));
        out.push(cur);
        for (e, &t) in log.iter().zip(stamps) {
            let stamp = (clock == Clock::Rounds).then_some(t);
            cur = self.intern(cur, Node::Entry(e.clone(), stamp));
            out.push(cur);
        }
        out
    }
}

/// The parts of a run the system looks at again.
#[derive(Debug, Clone)]
struct Trail<M> {
    world: usize,
    scheduler: Scheduler,
    logs: Vec<Vec<LocalEvent<M>>>,
    stamps: Vec<Vec<usize>>,
    states: Vec<Vec<StateId>>,
}

impl<M> Trail<M> {
    /// Log position at which the agent decides its `activation`-th batch
    /// of sends: 0 for the start, just after the `k`-th receive otherwise.
    fn decision(&self, agent: usize, activation: usize) -> Option<usize> {
        if activation == 0 {
            return Some(0);
        }
        let mut seen = 0;
        for (i, e) in self.logs[agent].iter().enumerate() {
            if matches!(e, LocalEvent::Recv { .. }) {
                seen += 1;
                if seen == activation {
                    return Some(i + 1);
                }
            }
        }
        None
    }

    fn activation(&self, agent: usize, m: usize) -> usize {
        self.logs[agent][..m].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count()
    }

    /// Ports sent on right after position `m`, before the next receive.
    fn sends_at(&self, agent: usize, m: usize) -> BTreeSet<usize> {
        self.logs[agent][m..]
            .iter()
            .map_while(|e| match e {
                LocalEvent::Send { port, .. } => Some(*port),
                LocalEvent::Recv { .. } => None,
            })
            .collect()
    }

    /// Global time of position `m`: when its last entry happened.
    fn time(&self, agent: usize, m: usize) -> usize {
        if m == 0 {
            0
        } else {
            self.stamps[agent][m - 1]
        }
    }

    /// Positions of the agent's log that are current at global time `t` or
    /// later.
    fn from_time(&self, agent: usize, t: usize) -> usize {
        self.stamps[agent].iter().take_while(|&&s| s < t).count()
    }
}

/// A protocol's runs over a set of worlds, indexed by local state.
pub struct RunSystem<Q: Protocol> {
    protocol: Q,
    policy: Policy,
    worlds: Vec<World>,
    /// The first `family` worlds are the ones the protocol is checked on;
    /// the rest only widen what agents consider possible.
    family: usize,
    atom_range: i32,
    states: States<<Q::Program as crate::runtime::Program>::Msg>,
    base: Vec<Trail<<Q::Program as crate::runtime::Program>::Msg>>,
    rank0: Vec<Vec<Situation>>,
    rank1: Vec<Vec<(usize, usize)>>,
    deviations: HashMap<DeviationKey, Trail<<Q::Program as crate::runtime::Program>::Msg>>,
}

type Msg<Q> = <<Q as Protocol>::Program as crate::runtime::Program>::Msg;

#[derive(Debug, thiserror::Error)]
pub enum SystemError {
    #[error("protocol {protocol} did not quiesce on {network} within {budget}")]
    Divergent { protocol: String, network: String, budget: usize },
    #[error("the system has no worlds")]
    Empty,
}

/// Runs `protocol` on every world. The first `family` worlds are checked;
/// all of them count as possible.
pub fn build_system<Q: Protocol>(
    protocol: Q,
    worlds: Vec<World>,
    family: usize,
    policy: Policy,
) -> Result<RunSystem<Q>, SystemError> {
    if worlds.is_empty() {
        return Err(SystemError::Empty);
    }
    let mut schedulers = vec![Scheduler::sync()];
    schedulers.extend(policy.seeds.iter().map(|&s| Scheduler::fifo_async(s)));
    let jobs: Vec<(usize, Scheduler)> =
        (0..worlds.len()).flat_map(|w| schedulers.iter().map(move |&s| (w, s))).collect();
    let runs: Vec<_> = jobs
        .par_iter()
        .map(|&(w, sched)| {
            crate::runtime::run_protocol(&worlds[w].topology, &protocol, sched, policy.budget)
                .map(|r| (w, sched, r.logs, r.stamps))
                .map_err(|_| SystemError::Divergent {
                    protocol: protocol.name(),
                    network: worlds[w].topology.name().to_string(),
                    budget: policy.budget,
                })
        })
        .collect::<Result<_, _>>()?;
    let atom_range = worlds.iter().map(|w| w.topology.len()).max().unwrap_or(1) as i32 - 1;
    let mut sys = RunSystem {
        protocol,
        policy,
        family: family.min(worlds.len()),
        worlds,
        atom_range,
        states: States { ids: HashMap::new() },
        base: Vec::new(),
        rank0: Vec::new(),
        rank1: Vec::new(),
        deviations: HashMap::new(),
    };
    for (w, scheduler, logs, stamps) in runs {
        let trail = sys.trail(w, scheduler, logs, stamps);
        let run = sys.base.len();
        for (agent, path) in trail.states.iter().enumerate() {
            for (m, &s) in path.iter().enumerate() {
                sys.slot(s);
                sys.rank0[s as usize].push(Situation { run: RunRef::Base(run), agent, m });
            }
        }
        sys.base.push(trail);
    }
    Ok(sys)
}

impl<Q: Protocol> RunSystem<Q> {
    fn trail(
        &mut self,
        world: usize,
        scheduler: Scheduler,
        logs: Vec<Vec<LocalEvent<Msg<Q>>>>,
        stamps: Vec<Vec<usize>>,
    ) -> Trail<Msg<Q>> {
        let topo = &self.worlds[world].topology;
        let states = (0..topo.len())
            .map(|a| self.states.path(topo.context(a), &logs[a], &stamps[a], self.policy.clock))
            .collect();
        Trail { world, scheduler, logs, stamps, states }
    }

    fn slot(&mut self, s: StateId) {
        let need = s as usize + 1;
        if self.rank0.len() < need {
            self.rank0.resize_with(need, Vec::new);
            self.rank1.resize_with(need, Vec::new);
        }
    }

    pub fn protocol(&self) -> &Q {
        &self.protocol
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    pub fn family(&self) -> &[World] {
        &self.worlds[..self.family]
    }

    /// Number of rank-0 runs.
    pub fn runs(&self) -> usize {
        self.base.len()
    }

    /// Rank-0 runs on the checked worlds.
    pub fn family_runs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.base.len()).filter(move |&r| self.base[r].world < self.family)
    }

    pub fn world_of(&self, run: RunRef) -> &World {
        &self.worlds[self.trail_of(run).world]
    }

    pub fn deviation_count(&self) -> usize {
        self.deviations.len()
    }

    pub fn state_count(&self) -> usize {
        self.states.ids.len()
    }

    fn trail_of(&self, run: RunRef) -> &Trail<Msg<Q>> {
        match run {
            RunRef::Base(r) => &self.base[r],
            RunRef::Deviation(k) => &self.deviations[&k],
        }
    }

    fn state(&self, s: &Situation) -> StateId {
        self.trail_of(s.run).states[s.agent][s.m]
    }

    /// The agent's log at a situation.
    pub fn log(&self, s: &Situation) -> &[LocalEvent<Msg<Q>>] {
        &self.trail_of(s.run).logs[s.agent][..s.m]
    }

    /// Every decision point of an agent in a rank-0 run.
    pub fn decisions(&self, run: usize, agent: usize) -> Vec<Situation> {
        let t = &self.base[run];
        let mut out = vec![Situation { run: RunRef::Base(run), agent, m: 0 }];
        for (i, e) in t.logs[agent].iter().enumerate() {
            if matches!(e, LocalEvent::Recv { .. }) {
                out.push(Situation { run: RunRef::Base(run), agent, m: i + 1 });
            }
        }
        out
    }

    /// Ports the protocol sends on at a situation.
    pub fn sends(&self, s: &Situation) -> BTreeSet<usize> {
        self.trail_of(s.run).sends_at(s.agent, s.m)
    }

    /// Rank-0 situations with the same local state.
    pub fn indistinguishable(&self, s: &Situation) -> &[Situation] {
        &self.rank0[self.state(s) as usize]
    }

    /// Worlds and agents of least rank with this local state.
    fn believed(&self, state: StateId) -> Vec<(usize, usize)> {
        let zero = &self.rank0[state as usize];
        if zero.is_empty() {
            return self.rank1[state as usize].clone();
        }
        zero.iter().map(|s| (self.trail_of(s.run).world, s.agent)).collect()
    }

    fn believes(&self, state: StateId, atom: &Atom) -> bool {
        let worlds = self.believed(state);
        !worlds.is_empty() && worlds.iter().all(|&(w, a)| atom.holds(&self.worlds[w], a))
    }

    fn believed_value(&self, state: StateId) -> Option<&Value> {
        let worlds = self.believed(state);
        let first = &self.worlds[worlds.first()?.0].f;
        worlds.iter().all(|&(w, _)| &self.worlds[w].f == first).then_some(first)
    }

    /// The value the agent believes the function has, if it believes one.
    pub fn believes_value(&self, s: &Situation) -> Option<&Value> {
        self.believed_value(self.state(s))
    }

    /// Whether the function has one value on every rank-0 situation the
    /// agent cannot tell apart from `s`.
    pub fn knows_value(&self, s: &Situation) -> CbFormulaResult {
        let same = self.indistinguishable(s);
        let mine = &self.world_of(s.run).f;
        let witnesses: Vec<Situation> =
            same.iter().filter(|o| &self.world_of(o.run).f != mine).copied().collect();
        CbFormulaResult { formula: Formula::KnowsValue, value: witnesses.is_empty(), witnesses }
    }

    /// Facts true in every world the agent believes possible.
    pub fn known_atoms(&self, s: &Situation) -> BTreeSet<Atom> {
        self.known(self.state(s))
    }

    fn known(&self, state: StateId) -> BTreeSet<Atom> {
        let worlds = self.believed(state);
        let Some(&(w0, a0)) = worlds.first() else { return BTreeSet::new() };
        let world = &self.worlds[w0];
        let mut candidates = vec![Atom::Size(world.topology.len()), Atom::F(world.f.clone())];
        candidates.extend((0..world.topology.len()).map(|k| Atom::Has(world.topology.context(k).input.clone())));
        if world.ring {
            let n = world.topology.len() as i64;
            for j in -self.atom_range..=self.atom_range {
                let at = (a0 as i64 + j as i64).rem_euclid(n) as usize;
                candidates.push(Atom::At(j, world.topology.context(at).input.clone()));
            }
        }
        candidates.into_iter().filter(|a| worlds.iter().all(|&(w, k)| a.holds(&self.worlds[w], k))).collect()
    }

    /// In-port on which the neighbour behind `port` talks back, if it does.
    fn reply_port(topo: &Topology, agent: usize, port: usize) -> Option<usize> {
        let ctx = topo.context(agent);
        let (nb, _) = topo.wire(agent, port);
        let name = &ctx.out_ports[port].name;
        let by_name = ctx.in_ports.iter().position(|p| &p.name == name && ctx.out_ports.len() > 1);
        by_name
            .filter(|&q| topo.source(agent, q).0 == nb)
            .or_else(|| (0..ctx.in_ports.len()).find(|&q| topo.source(agent, q).0 == nb))
    }

    /// What the agent knows at `s` that it has not yet told the neighbour
    /// behind `port` and that, as far as it knows, the neighbour did not
    /// already know when it last wrote back. In the sender's frame.
    pub fn new_info(&self, s: &Situation, port: usize) -> BTreeSet<Atom> {
        let t = self.trail_of(s.run);
        let log = &t.logs[s.agent][..s.m];
        let mut known = self.known(t.states[s.agent][s.m]);
        let last_send = log.iter().rposition(|e| matches!(e, LocalEvent::Send { port: p, .. } if *p == port));
        if let Some(i) = last_send {
            let before = t.states[s.agent][i];
            known.retain(|a| !self.believes(before, a));
        }
        if known.is_empty() {
            return known;
        }
        // The neighbour's state when it sent the last message I processed
        // from it, in every situation I consider possible. Where it never
        // wrote to me there is nothing to take off.
        let mut theirs: Vec<(StateId, i32)> = Vec::new();
        for o in &self.rank0[t.states[s.agent][s.m] as usize] {
            let ot = self.trail_of(o.run);
            let otopo = &self.worlds[ot.world].topology;
            let Some(reply) = Self::reply_port(otopo, o.agent, port) else { return known };
            let heard = log.iter().filter(|e| matches!(e, LocalEvent::Recv { port: q, .. } if *q == reply)).count();
            let (nb, nport) = otopo.source(o.agent, reply);
            let sent = ot.logs[nb]
                .iter()
                .enumerate()
                .filter(|(_, e)| matches!(e, LocalEvent::Send { port: p, .. } if *p == nport))
                .nth(heard.wrapping_sub(1));
            let Some((e, _)) = sent.filter(|_| heard > 0) else { return known };
            theirs.push((ot.states[nb][e], port_shift(&otopo.context(nb).out_ports[nport].name)));
        }
        known.retain(|a| !theirs.iter().all(|&(st, d)| self.believes(st, &a.shift(-d))));
        known
    }

    /// The situation that replaces `s` when the agent leaves out its send
    /// on `port`: `s` itself if it sends nothing there.
    pub fn close_drop_send(&mut self, s: &Situation, port: usize) -> Vec<Situation> {
        let RunRef::Base(run) = s.run else { return vec![*s] };
        if !self.sends(s).contains(&port) {
            return vec![*s];
        }
        let key = DeviationKey { run, agent: s.agent, activation: self.base[run].activation(s.agent, s.m), port };
        if !self.deviations.contains_key(&key) {
            let (k, trail) = self.deviate(key);
            self.deviations.insert(k, trail);
        }
        vec![Situation { run: RunRef::Deviation(key), agent: s.agent, m: s.m }]
    }

    fn deviation_run(&self, key: DeviationKey) -> (Vec<Vec<LocalEvent<Msg<Q>>>>, Vec<Vec<usize>>) {
        let t = &self.base[key.run];
        let topo = &self.worlds[t.world].topology;
        let w = Withhold { agent: key.agent, activation: key.activation, port: key.port };
        match run_with(topo, &self.protocol, t.scheduler, self.policy.budget, Some(w)) {
            Ok(r) => (r.logs, r.stamps),
            Err(e) => {
                let r = e.partial();
                (r.logs.clone(), r.stamps.clone())
            }
        }
    }

    fn deviate(&mut self, key: DeviationKey) -> (DeviationKey, Trail<Msg<Q>>) {
        let (logs, stamps) = self.deviation_run(key);
        let t = &self.base[key.run];
        let (world, scheduler) = (t.world, t.scheduler);
        let trail = self.trail(world, scheduler, logs, stamps);
        for path in &trail.states {
            for &s in path {
                self.slot(s);
            }
        }
        (key, trail)
    }

    /// Every single-send deviation of every rank-0 run, indexed for belief
    /// at local states that only deviations reach.
    pub fn add_deviations(&mut self) {
        let keys: Vec<DeviationKey> = (0..self.base.len())
            .flat_map(|run| {
                let t = &self.base[run];
                (0..t.logs.len())
                    .flat_map(move |agent| {
                        let acts = 1 + t.activation(agent, t.logs[agent].len());
                        (0..acts).flat_map(move |activation| {
                            let m = t.decision(agent, activation).unwrap();
                            t.sends_at(agent, m)
                                .into_iter()
                                .map(move |port| DeviationKey { run, agent, activation, port })
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|k| !self.deviations.contains_key(k))
            .collect();
        for chunk in keys.chunks(4096) {
            let runs: Vec<_> = chunk.par_iter().map(|&k| (k, self.deviation_run(k))).collect();
            for (key, (logs, stamps)) in runs {
                let t = &self.base[key.run];
                let (world, scheduler) = (t.world, t.scheduler);
                let trail = self.trail(world, scheduler, logs, stamps);
                for (agent, path) in trail.states.iter().enumerate() {
                    for &s in path {
                        self.slot(s);
                        if self.rank0[s as usize].is_empty() {
                            self.rank1[s as usize].push((world, agent));
                        }
                    }
                }
                self.deviations.insert(key, trail);
            }
        }
        for r in &mut self.rank1 {
            r.sort_unstable();
            r.dedup();
        }
    }

    /// Whether, from `s` on, the neighbour behind `port` comes to believe
    /// all of `content` (already in its frame) or a value for the function.
    fn eventually_learns(&self, s: &Situation, port: usize, content: Option<&BTreeSet<Atom>>) -> bool {
        let t = self.trail_of(s.run);
        let topo = &self.worlds[t.world].topology;
        let (nb, _) = topo.wire(s.agent, port);
        let from = t.from_time(nb, t.time(s.agent, s.m));
        t.states[nb][from..].iter().any(|&st| {
            self.believed_value(st).is_some() || content.is_some_and(|c| c.iter().all(|a| self.believes(st, a)))
        })
    }

    fn content(&self, s: &Situation, port: usize, info: &BTreeSet<Atom>) -> BTreeSet<Atom> {
        let topo = &self.world_of(s.run).topology;
        let d = port_shift(&topo.context(s.agent).out_ports[port].name);
        info.iter().map(|a| a.shift(d)).collect()
    }

    /// Whether the agent must send its new information on `port` at `s`:
    /// true when in some situation it believes possible, leaving the send
    /// out means the neighbour never comes to believe that information nor
    /// a value for the function. Needs [`RunSystem::add_deviations`].
    pub fn eval_send_condition(&self, s: &Situation, port: usize) -> CbFormulaResult {
        let info = self.new_info(s, port);
        let content = self.content(s, port, &info);
        let mut witnesses = Vec::new();
        for o in self.indistinguishable(s) {
            let RunRef::Base(run) = o.run else { continue };
            let at = if self.base[run].sends_at(o.agent, o.m).contains(&port) {
                let key = DeviationKey { run, agent: o.agent, activation: self.base[run].activation(o.agent, o.m), port };
                match self.deviations.get(&key) {
                    Some(_) => Situation { run: RunRef::Deviation(key), ..*o },
                    None => panic!("deviations have not been added to the system"),
                }
            } else {
                *o
            };
            if !self.eventually_learns(&at, port, Some(&content)) {
                witnesses.push(at);
            }
        }
        CbFormulaResult { formula: Formula::SendCondition, value: !witnesses.is_empty(), witnesses }
    }

    /// Whether the agent believes that the neighbour behind `port` comes to
    /// believe a value for the function, with the protocol followed.
    pub fn believes_eventually_knows(&self, s: &Situation, port: usize) -> CbFormulaResult {
        let witnesses: Vec<Situation> = self
            .indistinguishable(s)
            .iter()
            .filter(|o| !self.eventually_learns(o, port, None))
            .copied()
            .collect();
        CbFormulaResult { formula: Formula::BelievesEventuallyKnows, value: witnesses.is_empty(), witnesses }
    }

    /// Ports the knowledge-based program sends on at `s`.
    pub fn kb_sends(&self, s: &Situation) -> BTreeSet<usize> {
        let topo = &self.world_of(s.run).topology;
        (0..topo.context(s.agent).out_ports.len())
            .filter(|&p| !self.new_info(s, p).is_empty() && self.eval_send_condition(s, p).value)
            .collect()
    }

    /// Compares the protocol with the knowledge-based program at every
    /// decision point of every rank-0 run on the checked worlds.
    pub fn de_facto_check(&mut self) -> DeFactoReport {
        if self.deviations.is_empty() {
            self.add_deviations();
        }
        self.check_family()
    }

    /// [`RunSystem::de_facto_check`] on a system that already has its
    /// deviations.
    pub fn check_family(&self) -> DeFactoReport {
        let points: Vec<Situation> = self
            .family_runs()
            .flat_map(|r| (0..self.base[r].logs.len()).flat_map(move |a| self.decisions(r, a)))
            .collect();
        let mismatches: Vec<Mismatch> = points
            .par_iter()
            .filter_map(|s| {
                let proto = self.sends(s);
                let kb = self.kb_sends(s);
                (proto != kb).then(|| {
                    let t = self.trail_of(s.run);
                    let topo = &self.worlds[t.world].topology;
                    let names = |ps: &BTreeSet<usize>| -> Vec<String> {
                        ps.iter().map(|&p| topo.context(s.agent).out_ports[p].name.clone()).collect()
                    };
                    Mismatch {
                        network: topo.name().to_string(),
                        time: t.time(s.agent, s.m),
                        agent: topo.id(s.agent),
                        situation: *s,
                        proto_sends: names(&proto),
                        kb_sends: names(&kb),
                    }
                })
            })
            .collect();
        DeFactoReport { protocol: self.protocol.name(), states: points.len(), mismatches }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub network: String,
    pub time: usize,
    pub agent: u32,
    pub situation: Situation,
    pub proto_sends: Vec<String>,
    pub kb_sends: Vec<String>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "MISMATCH net={} time={} agent={} proto_sends={{{}}} kb_sends={{{}}}",
            self.network,
            self.time,
            self.agent,
            self.proto_sends.join(","),
            self.kb_sends.join(",")
        )
    }
}

#[derive(Debug, Clone)]
pub struct DeFactoReport {
    pub protocol: String,
    /// Decision points checked.
    pub states: usize,
    pub mismatches: Vec<Mismatch>,
}

impl DeFactoReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Networks with at least one mismatch.
    pub fn networks(&self) -> BTreeSet<&str> {
        self.mismatches.iter().map(|m| m.network.as_str()).collect()
    }
}

impl fmt::Display for DeFactoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.mismatches {
            writeln!(f, "{m}")?;
        }
        if self.ok() {
            writeln!(f, "OK states={}", self.states)
        } else {
            writeln!(f, "FAIL states={} mismatches={}", self.states, self.mismatches.len())
        }
    }
}
