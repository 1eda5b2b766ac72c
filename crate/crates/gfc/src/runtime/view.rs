//! Views exchanged by the full-information protocol.
//!
//! A view of depth `d` is the tree an agent can reconstruct after `d`
//! rounds: its own input and out-weights, and for every in-link the weight,
//! whether the link is two-way, and the sender's view of depth `d-1`.
//! Trees are hash-consed in a process-wide table, so equal views are equal
//! handles and comparing transcripts across networks is cheap.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Mutex, OnceLock};

use super::{Accept, AgentContext, LocalEvent, Message, Outgoing, Program, Protocol, Run};
use crate::network::Network;

/// What an agent knows before any communication.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalInfo {
    pub input: String,
    pub out_weights: Vec<String>,
}

impl LocalInfo {
    pub fn of(ctx: &AgentContext) -> LocalInfo {
        let mut out_weights: Vec<String> = ctx.out_ports.iter().map(|p| p.weight.clone()).collect();
        out_weights.sort();
        LocalInfo { input: ctx.input.clone(), out_weights }
    }

    pub fn of_agent(net: &Network, agent: usize) -> LocalInfo {
        LocalInfo {
            input: net.input(agent).to_string(),
            out_weights: net.out_weights(agent).into_iter().map(str::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Node {
    depth: u32,
    local: LocalInfo,
    /// Sorted `(weight, two-way, sender view)` per in-link.
    children: Vec<(String, bool, KnowledgeFragment)>,
}

#[derive(Default)]
struct Table {
    nodes: Vec<Node>,
    ids: HashMap<Node, u32>,
    truncations: HashMap<(u32, u32), u32>,
    sizes: HashMap<u32, usize>,
}

fn table() -> &'static Mutex<Table> {
    static TABLE: OnceLock<Mutex<Table>> = OnceLock::new();
    TABLE.get_or_init(Default::default)
}

/// Handle to an interned view tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KnowledgeFragment(u32);

impl KnowledgeFragment {
    pub fn leaf(local: LocalInfo) -> KnowledgeFragment {
        Self::intern(Node { depth: 0, local, children: Vec::new() })
    }

    /// Grafts the views received over each in-link under `local`. All
    /// children must have the same depth.
    pub fn graft(local: LocalInfo, mut children: Vec<(String, bool, KnowledgeFragment)>) -> KnowledgeFragment {
        children.sort();
        let depth = children.first().map_or(0, |c| c.2.depth()) + 1;
        debug_assert!(children.iter().all(|c| c.2.depth() + 1 == depth));
        Self::intern(Node { depth, local, children })
    }

    /// Depth-`d` graft for an agent with no in-links.
    pub fn isolated(local: LocalInfo, depth: u32) -> KnowledgeFragment {
        Self::intern(Node { depth, local, children: Vec::new() })
    }

    fn intern(node: Node) -> KnowledgeFragment {
        let mut t = table().lock().unwrap();
        if let Some(&id) = t.ids.get(&node) {
            return KnowledgeFragment(id);
        }
        let id = t.nodes.len() as u32;
        t.nodes.push(node.clone());
        t.ids.insert(node, id);
        KnowledgeFragment(id)
    }

    fn node(self) -> Node {
        table().lock().unwrap().nodes[self.0 as usize].clone()
    }

    pub fn depth(self) -> u32 {
        table().lock().unwrap().nodes[self.0 as usize].depth
    }

    pub fn local(self) -> LocalInfo {
        self.node().local
    }

    pub fn children(self) -> Vec<(String, bool, KnowledgeFragment)> {
        self.node().children
    }

    /// The same view cut down to depth `d`.
    pub fn truncate(self, d: u32) -> KnowledgeFragment {
        let node = self.node();
        if node.depth <= d {
            return self;
        }
        if let Some(&id) = table().lock().unwrap().truncations.get(&(self.0, d)) {
            return KnowledgeFragment(id);
        }
        let cut = if d == 0 {
            Self::leaf(node.local)
        } else if node.children.is_empty() {
            Self::isolated(node.local, d)
        } else {
            let children = node.children.into_iter().map(|(w, b, c)| (w, b, c.truncate(d - 1))).collect();
            Self::graft(node.local, children)
        };
        table().lock().unwrap().truncations.insert((self.0, d), cut.0);
        cut
    }

    /// Merging two views of the same agent keeps the deeper one; this is
    /// idempotent, commutative and associative.
    pub fn merge(self, other: KnowledgeFragment) -> KnowledgeFragment {
        let (deep, shallow) = if self.depth() >= other.depth() { (self, other) } else { (other, self) };
        debug_assert_eq!(deep.truncate(shallow.depth()), shallow);
        deep
    }

    /// Number of nodes of the unfolded tree, saturating.
    pub fn size(self) -> usize {
        if let Some(&s) = table().lock().unwrap().sizes.get(&self.0) {
            return s;
        }
        let s = self
            .children()
            .iter()
            .fold(1usize, |acc, (_, _, c)| acc.saturating_add(c.size()));
        table().lock().unwrap().sizes.insert(self.0, s);
        s
    }

    /// Initial information of every agent appearing in the view.
    pub fn locals(self) -> BTreeSet<LocalInfo> {
        let mut seen = BTreeSet::new();
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            let node = v.node();
            out.insert(node.local);
            stack.extend(node.children.into_iter().map(|c| c.2));
        }
        out
    }

    /// Views of every agent of `net` at depths `0..=depth`; `result[d][i]`.
    pub fn of_network(net: &Network, depth: usize) -> Vec<Vec<KnowledgeFragment>> {
        let mut levels = vec![(0..net.len()).map(|i| Self::leaf(LocalInfo::of_agent(net, i))).collect::<Vec<_>>()];
        for d in 1..=depth {
            let prev = &levels[d - 1];
            let next = (0..net.len())
                .map(|i| {
                    let children: Vec<_> = net
                        .in_edges(i)
                        .map(|e| (e.weight.clone(), net.has_edge(i, e.src), prev[e.src]))
                        .collect();
                    if children.is_empty() {
                        Self::isolated(LocalInfo::of_agent(net, i), d as u32)
                    } else {
                        Self::graft(LocalInfo::of_agent(net, i), children)
                    }
                })
                .collect();
            levels.push(next);
        }
        levels
    }
}

/// A full-information message: the link label as the sender sees it and the
/// sender's view, stamped with its round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ViewMsg {
    pub round: usize,
    pub weight: String,
    pub bidirectional: bool,
    pub view: KnowledgeFragment,
}

impl Message for ViewMsg {
    fn kind(&self) -> &'static str {
        "view"
    }

    fn size(&self) -> usize {
        self.view.size()
    }
}

/// Everyone sends their current view to all out-neighbours, for a fixed
/// number of rounds. Round `k` starts once all round `k-1` messages are in.
#[derive(Debug, Clone)]
pub struct FullInfo {
    rounds: usize,
}

pub fn full_information(rounds: usize) -> FullInfo {
    assert!(rounds >= 1, "full information needs at least one round");
    FullInfo { rounds }
}

impl Protocol for FullInfo {
    type Program = FullInfoAgent;

    fn name(&self) -> String {
        format!("full_information({})", self.rounds)
    }

    fn spawn(&self, ctx: &AgentContext) -> FullInfoAgent {
        FullInfoAgent::new(ctx, Some(self.rounds))
    }
}

/// Round bookkeeping shared by the full-information and standard programs.
#[derive(Debug, Clone)]
pub struct FullInfoAgent {
    local: LocalInfo,
    links: Vec<(String, bool)>,
    in_ports: usize,
    limit: Option<usize>,
    completed: usize,
    view: KnowledgeFragment,
    pending: HashMap<usize, Vec<Option<(String, bool, KnowledgeFragment)>>>,
}

impl FullInfoAgent {
    pub(crate) fn new(ctx: &AgentContext, limit: Option<usize>) -> FullInfoAgent {
        let local = LocalInfo::of(ctx);
        FullInfoAgent {
            view: KnowledgeFragment::leaf(local.clone()),
            local,
            links: ctx.out_ports.iter().map(|p| (p.weight.clone(), p.bidirectional)).collect(),
            in_ports: ctx.in_ports.len(),
            limit,
            completed: 0,
            pending: HashMap::new(),
        }
    }

    /// Rounds completed so far; also the depth of the current view.
    pub fn completed(&self) -> usize {
        self.completed
    }

    pub fn view(&self) -> KnowledgeFragment {
        self.view
    }

    fn more_rounds(&self) -> bool {
        self.limit.is_none_or(|l| self.completed < l)
    }

    pub(crate) fn broadcast(&self) -> Vec<Outgoing<ViewMsg>> {
        self.links
            .iter()
            .enumerate()
            .map(|(port, (w, b))| {
                Outgoing::new(
                    port,
                    ViewMsg { round: self.completed + 1, weight: w.clone(), bidirectional: *b, view: self.view },
                )
            })
            .collect()
    }

    /// Completes every round whose messages are all in; after each, asks
    /// `on_round` whether to keep going and collects the sends.
    pub(crate) fn advance(&mut self, mut on_round: impl FnMut(&Self) -> bool) -> (Vec<Outgoing<ViewMsg>>, bool) {
        let mut sends = Vec::new();
        loop {
            let next = self.completed + 1;
            let ready = match self.pending.get(&next) {
                Some(slots) => slots.iter().all(Option::is_some),
                None => self.in_ports == 0 && self.limit.is_some(),
            };
            if !ready || !self.more_rounds() {
                return (sends, true);
            }
            let children: Vec<_> = self.pending.remove(&next).unwrap_or_default().into_iter().flatten().collect();
            self.view = if children.is_empty() {
                KnowledgeFragment::isolated(self.local.clone(), next as u32)
            } else {
                KnowledgeFragment::graft(self.local.clone(), children)
            };
            self.completed = next;
            if !on_round(self) {
                return (sends, false);
            }
            if self.more_rounds() {
                sends.extend(self.broadcast());
            }
        }
    }

    pub(crate) fn store(&mut self, port: usize, msg: ViewMsg) {
        let slots = self.pending.entry(msg.round).or_insert_with(|| vec![None; self.in_ports]);
        slots[port] = Some((msg.weight, msg.bidirectional, msg.view));
    }
}

impl Program for FullInfoAgent {
    type Msg = ViewMsg;

    fn start(&mut self) -> Vec<Outgoing<ViewMsg>> {
        if !self.more_rounds() {
            return Vec::new();
        }
        let mut sends = self.broadcast();
        sends.extend(self.advance(|_| true).0);
        sends
    }

    fn accepts(&self) -> Accept {
        if self.more_rounds() && self.in_ports > 0 {
            Accept::Any
        } else {
            Accept::Nothing
        }
    }

    fn on_message(&mut self, port: usize, msg: ViewMsg) -> Vec<Outgoing<ViewMsg>> {
        self.store(port, msg);
        self.advance(|_| true).0
    }
}

/// Messages the agent processed that were stamped with round `k`, sorted.
/// Returns `None` when the agent never completed round `k`.
pub fn transcript(run: &Run<FullInfoAgent>, agent: usize, k: usize) -> Option<Vec<ViewMsg>> {
    if k == 0 {
        return Some(Vec::new());
    }
    if run.programs[agent].completed() < k {
        return None;
    }
    let mut msgs: Vec<ViewMsg> = run.logs[agent]
        .iter()
        .filter_map(|e| match e {
            LocalEvent::Recv { msg, .. } if msg.round == k => Some(msg.clone()),
            _ => None,
        })
        .collect();
    msgs.sort();
    Some(msgs)
}
