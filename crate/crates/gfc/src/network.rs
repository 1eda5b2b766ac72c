//! Labeled directed networks, relative naming, and finite families.
//!
//! A [`Network`] is a finite, simple, weakly connected digraph whose agents
//! carry an input token and whose edges carry a weight token. Tokens are
//! compared exactly. External ids are bookkeeping only: nothing in the
//! protocols or in the catalog functions looks at them.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: self-loop on agent {id}")]
    SelfLoop { line: usize, id: u32 },
    #[error("line {line}: duplicate edge {src} -> {dst}")]
    DuplicateEdge { line: usize, src: u32, dst: u32 },
    #[error("line {line}: duplicate agent {id}")]
    DuplicateAgent { line: usize, id: u32 },
    #[error("unknown agent {0}")]
    UnknownAgent(u32),
    #[error("network has no agents")]
    Empty,
    #[error("network is disconnected")]
    Disconnected,
    #[error("not strongly connected")]
    NotStronglyConnected,
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("size bound must be positive")]
    ZeroBound,
    #[error("family is empty")]
    EmptyFamily,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Agent {
    pub id: u32,
    pub input: String,
}

/// Edge between internal agent indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: String,
}

#[derive(Debug, Clone)]
pub struct Network {
    name: String,
    agents: Vec<Agent>,
    edges: Vec<Edge>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
    by_id: HashMap<u32, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.agents == other.agents && self.edges == other.edges
    }
}

impl Eq for Network {}

struct EdgeDecl {
    line: usize,
    src: u32,
    dst: u32,
    weight: String,
}

impl Network {
    /// Builds and validates a network. Edges are given by external ids.
    pub fn new(
        name: impl Into<String>,
        agents: Vec<Agent>,
        edges: Vec<(u32, u32, String)>,
    ) -> Result<Network, NetworkError> {
        let decls = edges
            .into_iter()
            .map(|(src, dst, weight)| EdgeDecl { line: 0, src, dst, weight })
            .collect();
        Self::build(name.into(), agents.into_iter().map(|a| (0, a)).collect(), decls)
    }

    fn build(
        name: String,
        agents: Vec<(usize, Agent)>,
        edges: Vec<EdgeDecl>,
    ) -> Result<Network, NetworkError> {
        if agents.is_empty() {
            return Err(NetworkError::Empty);
        }
        let mut by_id = HashMap::new();
        for (ix, (line, a)) in agents.iter().enumerate() {
            if by_id.insert(a.id, ix).is_some() {
                return Err(NetworkError::DuplicateAgent { line: *line, id: a.id });
            }
        }
        let n = agents.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        let mut lookup = HashMap::new();
        let mut list = Vec::with_capacity(edges.len());
        for d in edges {
            if d.src == d.dst {
                return Err(NetworkError::SelfLoop { line: d.line, id: d.src });
            }
            let src = *by_id.get(&d.src).ok_or(NetworkError::UnknownAgent(d.src))?;
            let dst = *by_id.get(&d.dst).ok_or(NetworkError::UnknownAgent(d.dst))?;
            if lookup.insert((src, dst), list.len()).is_some() {
                return Err(NetworkError::DuplicateEdge { line: d.line, src: d.src, dst: d.dst });
            }
            out[src].push(list.len());
            inc[dst].push(list.len());
            list.push(Edge { src, dst, weight: d.weight });
        }
        let net = Network {
            name,
            agents: agents.into_iter().map(|(_, a)| a).collect(),
            edges: list,
            out,
            inc,
            lookup,
            by_id,
        };
        if !net.weakly_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(net)
    }

    fn weakly_connected(&self) -> bool {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            let nbrs = self.out[v]
                .iter()
                .map(|&e| self.edges[e].dst)
                .chain(self.inc[v].iter().map(|&e| self.edges[e].src));
            for u in nbrs {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Unidirectional ring. Agents are listed going right, agent `k` gets id
    /// `k+1`, and every agent has a single out-edge to its left neighbour.
    pub fn uni_ring<S: AsRef<str>>(
        name: impl Into<String>,
        inputs: &[S],
        weight: &str,
    ) -> Result<Network, NetworkError> {
        let weights = vec![weight.to_string(); inputs.len()];
        Self::uni_ring_weighted(name, inputs, &weights)
    }

    /// Unidirectional ring; `weights[k]` labels the edge out of agent `k`.
    pub fn uni_ring_weighted<S: AsRef<str>, W: AsRef<str>>(
        name: impl Into<String>,
        inputs: &[S],
        weights: &[W],
    ) -> Result<Network, NetworkError> {
        let n = inputs.len() as u32;
        let agents = ring_agents(inputs);
        let edges = (0..n)
            .map(|k| (k + 1, (k + n - 1) % n + 1, weights[k as usize].as_ref().to_string()))
            .collect();
        Self::new(name, agents, edges)
    }

    /// Bidirectional ring with one weight on every edge.
    pub fn bi_ring<S: AsRef<str>>(
        name: impl Into<String>,
        inputs: &[S],
        weight: &str,
    ) -> Result<Network, NetworkError> {
        let n = inputs.len();
        let w = vec![weight.to_string(); n];
        Self::bi_ring_weighted(name, inputs, &w, &w)
    }

    /// Bidirectional ring; `left[k]` labels the edge from `k` to its left
    /// neighbour and `right[k]` the edge to its right neighbour. For two
    /// agents the ring degenerates to a single pair of edges and only
    /// `left` is used.
    pub fn bi_ring_weighted<S: AsRef<str>, W: AsRef<str>>(
        name: impl Into<String>,
        inputs: &[S],
        left: &[W],
        right: &[W],
    ) -> Result<Network, NetworkError> {
        let n = inputs.len() as u32;
        let agents = ring_agents(inputs);
        let mut edges = Vec::new();
        for k in 0..n {
            edges.push((k + 1, (k + n - 1) % n + 1, left[k as usize].as_ref().to_string()));
            if n > 2 {
                edges.push((k + 1, (k + 1) % n + 1, right[k as usize].as_ref().to_string()));
            }
        }
        Self::new(name, agents, edges)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Network {
        self.name = name.into();
        self
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn id(&self, ix: usize) -> u32 {
        self.agents[ix].id
    }

    pub fn input(&self, ix: usize) -> &str {
        &self.agents[ix].input
    }

    /// Internal index of an external id.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.by_id.get(&id).copied()
    }

    pub fn out_edges(&self, ix: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.out[ix].iter().map(move |&e| &self.edges[e])
    }

    pub fn in_edges(&self, ix: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.inc[ix].iter().map(move |&e| &self.edges[e])
    }

    pub fn out_degree(&self, ix: usize) -> usize {
        self.out[ix].len()
    }

    pub fn in_degree(&self, ix: usize) -> usize {
        self.inc[ix].len()
    }

    pub fn weight(&self, src: usize, dst: usize) -> Option<&str> {
        self.lookup.get(&(src, dst)).map(|&e| self.edges[e].weight.as_str())
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.lookup.contains_key(&(src, dst))
    }

    /// The edge `src -> dst` exists and so does `dst -> src`.
    pub fn is_bidirectional(&self, src: usize, dst: usize) -> bool {
        self.has_edge(src, dst) && self.has_edge(dst, src)
    }

    /// Sorted out-edge weights.
    pub fn out_weights(&self, ix: usize) -> Vec<&str> {
        let mut w: Vec<&str> = self.out_edges(ix).map(|e| e.weight.as_str()).collect();
        w.sort_unstable();
        w
    }

    /// Hop distances from `ix` along directed edges; `None` when unreachable.
    pub fn distances_from(&self, ix: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        dist[ix] = Some(0);
        let mut queue = VecDeque::from([ix]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for e in self.out_edges(v) {
                if dist[e.dst].is_none() {
                    dist[e.dst] = Some(d + 1);
                    queue.push_back(e.dst);
                }
            }
        }
        dist
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.diameter().is_ok()
    }

    /// Longest shortest directed path over all ordered pairs.
    pub fn diameter(&self) -> Result<usize, NetworkError> {
        let mut best = 0;
        for v in 0..self.len() {
            for d in self.distances_from(v) {
                best = best.max(d.ok_or(NetworkError::NotStronglyConnected)?);
            }
        }
        Ok(best)
    }

    /// Equal inputs and equal out-weight multisets, by external id.
    pub fn locally_same(&self, i: u32, j: u32) -> Result<bool, NetworkError> {
        let a = self.index_of(i).ok_or(NetworkError::UnknownAgent(i))?;
        let b = self.index_of(j).ok_or(NetworkError::UnknownAgent(j))?;
        Ok(self.locally_same_ix(a, b))
    }

    pub fn locally_same_ix(&self, a: usize, b: usize) -> bool {
        self.input(a) == self.input(b) && self.out_weights(a) == self.out_weights(b)
    }

    /// Same network with agents reordered: agent `k` of the result is agent
    /// `perm[k]` of `self`, and receives external id `k+1`.
    pub fn permuted(&self, perm: &[usize]) -> Network {
        let mut inv = vec![0; perm.len()];
        for (k, &p) in perm.iter().enumerate() {
            inv[p] = k;
        }
        let agents = perm
            .iter()
            .enumerate()
            .map(|(k, &p)| Agent { id: k as u32 + 1, input: self.agents[p].input.clone() })
            .collect();
        let mut edges: Vec<(u32, u32, String)> = self
            .edges
            .iter()
            .map(|e| (inv[e.src] as u32 + 1, inv[e.dst] as u32 + 1, e.weight.clone()))
            .collect();
        edges.sort();
        Network::new(self.name.clone(), agents, edges).expect("permutation preserves validity")
    }

    /// Per-agent isomorphism invariant.
    fn signature(&self, ix: usize) -> (String, Vec<String>, Vec<String>) {
        let mut ins: Vec<String> = self.in_edges(ix).map(|e| e.weight.clone()).collect();
        ins.sort();
        let outs = self.out_weights(ix).into_iter().map(str::to_string).collect();
        (self.input(ix).to_string(), outs, ins)
    }

    fn invariant(&self) -> Vec<(String, Vec<String>, Vec<String>)> {
        let mut sig: Vec<_> = (0..self.len()).map(|i| self.signature(i)).collect();
        sig.sort();
        sig
    }

    /// Line-oriented text form, parseable by [`parse_network`].
    pub fn to_text(&self) -> String {
        let mut s = format!("network {}\n", self.name);
        for a in &self.agents {
            s.push_str(&format!("agent {} input={}\n", a.id, a.input));
        }
        for e in &self.edges {
            s.push_str(&format!("edge {} {} w={}\n", self.id(e.src), self.id(e.dst), e.weight));
        }
        s
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn ring_agents<S: AsRef<str>>(inputs: &[S]) -> Vec<Agent> {
    inputs
        .iter()
        .enumerate()
        .map(|(k, s)| Agent { id: k as u32 + 1, input: s.as_ref().to_string() })
        .collect()
}

/// Parses the line format:
///
/// ```text
/// network <name>
/// agent <id> input=<token>
/// edge <src> <dst> w=<token>
/// ```
///
/// `#` starts a comment.
pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let mut name = None;
    let mut agents = Vec::new();
    let mut edges = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let words: Vec<&str> = body.split_whitespace().collect();
        let syntax = |msg: &str| NetworkError::Syntax { line, msg: msg.to_string() };
        match words[0] {
            "network" => {
                if name.is_some() {
                    return Err(syntax("second network header"));
                }
                if words.len() != 2 {
                    return Err(syntax("expected `network <name>`"));
                }
                name = Some(words[1].to_string());
            }
            _ if name.is_none() => return Err(syntax("expected `network <name>` first")),
            "agent" => {
                if words.len() != 3 {
                    return Err(syntax("expected `agent <id> input=<token>`"));
                }
                let id = words[1].parse::<u32>().map_err(|_| syntax("agent id must be an integer"))?;
                let input = keyed(words[2], "input=").ok_or_else(|| syntax("expected input=<token>"))?;
                agents.push((line, Agent { id, input }));
            }
            "edge" => {
                if words.len() != 4 {
                    return Err(syntax("expected `edge <src> <dst> w=<token>`"));
                }
                let src = words[1].parse::<u32>().map_err(|_| syntax("edge source must be an integer"))?;
                let dst = words[2].parse::<u32>().map_err(|_| syntax("edge target must be an integer"))?;
                let weight = keyed(words[3], "w=").ok_or_else(|| syntax("expected w=<token>"))?;
                edges.push(EdgeDecl { line, src, dst, weight });
            }
            other => return Err(syntax(&format!("unknown directive `{other}`"))),
        }
    }
    let name = name.ok_or(NetworkError::Syntax { line: 1, msg: "missing network header".into() })?;
    Network::build(name, agents, edges)
}

fn keyed(word: &str, key: &str) -> Option<String> {
    word.strip_prefix(key).filter(|v| !v.is_empty()).map(str::to_string)
}

/// Finds a label- and weight-preserving bijection `h` with `h[i]` the image
/// in `b` of agent `i` of `a`.
pub fn isomorphism(a: &Network, b: &Network) -> Option<Vec<usize>> {
    if a.len() != b.len() || a.edges.len() != b.edges.len() || a.invariant() != b.invariant() {
        return None;
    }
    let n = a.len();
    // Visit agents of `a` in undirected BFS order so each new agent is
    // usually adjacent to an already mapped one.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let nbrs: Vec<usize> = a
                .out_edges(v)
                .map(|e| e.dst)
                .chain(a.in_edges(v).map(|e| e.src))
                .collect();
            for u in nbrs {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    let sig_a: Vec<_> = (0..n).map(|i| a.signature(i)).collect();
    let sig_b: Vec<_> = (0..n).map(|i| b.signature(i)).collect();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend(
        depth: usize,
        order: &[usize],
        a: &Network,
        b: &Network,
        sig_a: &[(String, Vec<String>, Vec<String>)],
        sig_b: &[(String, Vec<String>, Vec<String>)],
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let v = order[depth];
        for c in 0..b.len() {
            if used[c] || sig_a[v] != sig_b[c] {
                continue;
            }
            let consistent = order[..depth].iter().all(|&u| {
                let m = map[u];
                a.weight(u, v) == b.weight(m, c) && a.weight(v, u) == b.weight(c, m)
            });
            if !consistent {
                continue;
            }
            map[v] = c;
            used[c] = true;
            if extend(depth + 1, order, a, b, sig_a, sig_b, map, used) {
                return true;
            }
            used[c] = false;
        }
        map[v] = usize::MAX;
        false
    }

    if extend(0, &order, a, b, &sig_a, &sig_b, &mut map, &mut used) {
        Some(map)
    } else {
        None
    }
}

pub fn isomorphic(a: &Network, b: &Network) -> bool {
    isomorphism(a, b).is_some()
}

/// Local names an agent uses for its neighbours. `I` always denotes the
/// agent itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelativeNaming {
    names: Vec<Vec<(String, usize)>>,
}

impl RelativeNaming {
    /// Names `1..d` for out-neighbours in edge declaration order, followed by
    /// names for neighbours that only send to the agent.
    pub fn by_edge_order(net: &Network) -> RelativeNaming {
        let names = (0..net.len())
            .map(|i| {
                let mut list: Vec<(String, usize)> = Vec::new();
                let mut nbrs: Vec<usize> = net.out_edges(i).map(|e| e.dst).collect();
                nbrs.extend(net.in_edges(i).map(|e| e.src).filter(|s| !net.has_edge(i, *s)));
                for (k, j) in nbrs.into_iter().enumerate() {
                    list.push(((k + 1).to_string(), j));
                }
                list
            })
            .collect();
        RelativeNaming { names }
    }

    /// `L`/`R` naming for rings built by [`Network::uni_ring`] or
    /// [`Network::bi_ring`]: agent `k`'s left neighbour is `k-1`.
    pub fn ring(n: usize) -> RelativeNaming {
        let names = (0..n)
            .map(|k| vec![("L".to_string(), (k + n - 1) % n), ("R".to_string(), (k + 1) % n)])
            .collect();
        RelativeNaming { names }
    }

    pub fn resolve(&self, agent: usize, name: &str) -> Option<usize> {
        if name == "I" {
            return Some(agent);
        }
        self.names[agent].iter().find(|(n, _)| n == name).map(|(_, j)| *j)
    }

    pub fn names(&self, agent: usize) -> impl Iterator<Item = &str> + '_ {
        self.names[agent].iter().map(|(n, _)| n.as_str())
    }

    /// The name that the neighbour `name` of `agent` uses for `agent`.
    pub fn calls(&self, agent: usize, name: &str) -> Option<&str> {
        let j = self.resolve(agent, name)?;
        if j == agent {
            return Some("I");
        }
        let mut hits = self.names[j].iter().filter(|(_, t)| *t == agent);
        let first = hits.next()?;
        // In a two-agent ring both names point at the same agent; pick the
        // mirror image of the name used.
        match hits.next() {
            None => Some(first.0.as_str()),
            Some(_) => Some(if name == "L" { "R" } else { "L" }),
        }
    }
}

/// Explicit finite family of pairwise non-isomorphic networks.
#[derive(Debug, Clone)]
pub struct NetworkFamily {
    members: Vec<Network>,
    description: String,
}

impl NetworkFamily {
    /// Keeps the first member of each isomorphism class, in input order.
    pub fn new(description: impl Into<String>, members: Vec<Network>) -> Result<Self, NetworkError> {
        let mut kept: Vec<Network> = Vec::new();
        let mut buckets: HashMap<Vec<(String, Vec<String>, Vec<String>)>, Vec<usize>> = HashMap::new();
        for net in members {
            let key = net.invariant();
            let bucket = buckets.entry(key).or_default();
            if bucket.iter().any(|&k| isomorphic(&kept[k], &net)) {
                continue;
            }
            bucket.push(kept.len());
            kept.push(net);
        }
        if kept.is_empty() {
            return Err(NetworkError::EmptyFamily);
        }
        Ok(NetworkFamily { members: kept, description: description.into() })
    }

    pub fn members(&self) -> &[Network] {
        &self.members
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, ix: usize) -> &Network {
        &self.members[ix]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.members.iter().position(|n| n.name() == name)
    }
}

#[derive(Debug, Clone)]
pub enum FamilySpec {
    UniRings { max_n: usize, inputs: Vec<String>, weights: Vec<String> },
    BiRings { max_n: usize, inputs: Vec<String>, weights: Vec<String> },
    LabelingsOf { graph: Network, inputs: Vec<String>, weights: Vec<String> },
    Explicit(Vec<Network>),
}

impl FamilySpec {
    pub fn uni_rings(max_n: usize, inputs: &[&str], weights: &[&str]) -> FamilySpec {
        FamilySpec::UniRings { max_n, inputs: owned(inputs), weights: owned(weights) }
    }

    pub fn bi_rings(max_n: usize, inputs: &[&str], weights: &[&str]) -> FamilySpec {
        FamilySpec::BiRings { max_n, inputs: owned(inputs), weights: owned(weights) }
    }

    pub fn labelings_of(graph: Network, inputs: &[&str], weights: &[&str]) -> FamilySpec {
        FamilySpec::LabelingsOf { graph, inputs: owned(inputs), weights: owned(weights) }
    }
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// All words of length `len` over `alphabet`, in lexicographic order of
/// alphabet positions.
fn words(alphabet: &[String], len: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet.len());
        for w in &out {
            for a in alphabet {
                let mut v = w.clone();
                v.push(a.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn ring_name(kind: &str, inputs: &[String], weights: &[String], show_weights: bool) -> String {
    let mut name = format!("{kind}{}-{}", inputs.len(), inputs.join("."));
    if show_weights {
        name.push_str("-w");
        name.push_str(&weights.join("."));
    }
    name
}

/// Enumerates a finite family and removes isomorphic duplicates. Rings have
/// at least two agents, since a one-agent ring would need a self-loop.
pub fn generate_family(spec: &FamilySpec) -> Result<NetworkFamily, NetworkError> {
    match spec {
        FamilySpec::UniRings { max_n, inputs, weights }
        | FamilySpec::BiRings { max_n, inputs, weights } => {
            if inputs.is_empty() || weights.is_empty() {
                return Err(NetworkError::EmptyAlphabet);
            }
            if *max_n == 0 {
                return Err(NetworkError::ZeroBound);
            }
            let uni = matches!(spec, FamilySpec::UniRings { .. });
            let show = weights.len() > 1;
            let mut nets = Vec::new();
            for n in 2..=*max_n {
                let edge_count = if uni || n == 2 { n } else { 2 * n };
                for ins in words(inputs, n) {
                    for ws in words(weights, edge_count) {
                        let net = if uni {
                            Network::uni_ring_weighted(ring_name("uni", &ins, &ws, show), &ins, &ws)?
                        } else {
                            let (left, right) = if n == 2 {
                                (ws.clone(), ws.clone())
                            } else {
                                (ws[..n].to_vec(), ws[n..].to_vec())
                            };
                            Network::bi_ring_weighted(ring_name("bi", &ins, &ws, show), &ins, &left, &right)?
                        };
                        nets.push(net);
                    }
                }
            }
            let kind = if uni { "uni-rings" } else { "bi-rings" };
            NetworkFamily::new(
                format!("{kind} n<={max_n} inputs={} weights={}", inputs.join(","), weights.join(",")),
                nets,
            )
        }
        FamilySpec::LabelingsOf { graph, inputs, weights } => {
            if inputs.is_empty() || weights.is_empty() {
                return Err(NetworkError::EmptyAlphabet);
            }
            let mut nets = Vec::new();
            for ins in words(inputs, graph.len()) {
                for ws in words(weights, graph.edges().len()) {
                    let agents = graph
                        .agents()
                        .iter()
                        .zip(&ins)
                        .map(|(a, i)| Agent { id: a.id, input: i.clone() })
                        .collect();
                    let edges = graph
                        .edges()
                        .iter()
                        .zip(&ws)
                        .map(|(e, w)| (graph.id(e.src), graph.id(e.dst), w.clone()))
                        .collect();
                    let mut name = format!("{}-{}", graph.name(), ins.join("."));
                    if weights.len() > 1 {
                        name.push_str("-w");
                        name.push_str(&ws.join("."));
                    }
                    nets.push(Network::new(name, agents, edges)?);
                }
            }
            NetworkFamily::new(format!("labelings of {}", graph.name()), nets)
        }
        FamilySpec::Explicit(list) => NetworkFamily::new("explicit", list.clone()),
    }
}

/// Value of a global function; compared for equality only.
pub type Value = String;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{function} is undefined on {network}: {reason}")]
pub struct FunctionError {
    pub function: String,
    pub network: String,
    pub reason: String,
}

type Evaluator = dyn Fn(&Network) -> Result<Value, String> + Send + Sync;

/// A named function of whole networks that ignores external ids.
#[derive(Clone)]
pub struct GlobalFunction {
    name: String,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for GlobalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("GlobalFunction").field(&self.name).finish()
    }
}

fn numeric_inputs(net: &Network) -> Option<Vec<i64>> {
    net.agents().iter().map(|a| a.input.parse::<i64>().ok()).collect()
}

impl GlobalFunction {
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&Network) -> Result<Value, String> + Send + Sync + 'static,
    ) -> GlobalFunction {
        GlobalFunction { name: name.into(), eval: Arc::new(eval) }
    }

    /// Largest input: numeric order when all inputs are integers,
    /// lexicographic otherwise. With distinct ids this is the leader.
    pub fn max_input() -> GlobalFunction {
        Self::custom("max_input", |net| {
            Ok(match numeric_inputs(net) {
                Some(xs) => xs.into_iter().max().unwrap().to_string(),
                None => net.agents().iter().map(|a| a.input.clone()).max().unwrap(),
            })
        })
    }

    pub fn size() -> GlobalFunction {
        Self::custom("size", |net| Ok(net.len().to_string()))
    }

    pub fn sum_inputs() -> GlobalFunction {
        Self::custom("sum_inputs", |net| {
            numeric_inputs(net)
                .map(|xs| xs.into_iter().sum::<i64>().to_string())
                .ok_or_else(|| "inputs are not integers".to_string())
        })
    }

    pub fn multiset_inputs() -> GlobalFunction {
        Self::custom("multiset_inputs", |net| {
            let mut xs: Vec<&str> = net.agents().iter().map(|a| a.input.as_str()).collect();
            xs.sort_unstable();
            Ok(format!("{{{}}}", xs.join(",")))
        })
    }

    pub fn diameter() -> GlobalFunction {
        Self::custom("diameter", |net| net.diameter().map(|d| d.to_string()).map_err(|e| e.to_string()))
    }

    pub fn catalog() -> Vec<GlobalFunction> {
        vec![
            Self::max_input(),
            Self::size(),
            Self::sum_inputs(),
            Self::multiset_inputs(),
            Self::diameter(),
        ]
    }

    pub fn by_name(name: &str) -> Option<GlobalFunction> {
        Self::catalog().into_iter().find(|f| f.name == name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, net: &Network) -> Result<Value, FunctionError> {
        (self.eval)(net).map_err(|reason| FunctionError {
            function: self.name.clone(),
            network: net.name().to_string(),
            reason,
        })
    }

    /// Compares the function on each sample against `rounds` random
    /// relabelings of it. Returns the first network on which it differs.
    pub fn check_invariance(&self, samples: &[Network], rounds: usize, seed: u64) -> Result<(), String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for net in samples {
            let base = (self.eval)(net);
            for _ in 0..rounds {
                let mut perm: Vec<usize> = (0..net.len()).collect();
                perm.shuffle(&mut rng);
                if (self.eval)(&net.permuted(&perm)) != base {
                    return Err(net.name().to_string());
                }
            }
        }
        Ok(())
    }
}

/// Seeded random strongly connected network on `n` agents with distinct
/// inputs `1..=n`. A random Hamiltonian cycle guarantees strong
/// connectivity; each other ordered pair then gets an edge with
/// probability `density`. Weights are drawn from `weights`.
pub fn random_strongly_connected(
    name: impl Into<String>,
    n: usize,
    density: f64,
    weights: &[&str],
    seed: u64,
) -> Result<Network, NetworkError> {
    if n == 0 || weights.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut inputs: Vec<usize> = (1..=n).collect();
    inputs.shuffle(&mut rng);
    let agents = (0..n).map(|i| Agent { id: i as u32 + 1, input: inputs[i].to_string() }).collect();
    let mut present = vec![vec![false; n]; n];
    if n > 1 {
        for k in 0..n {
            present[order[k]][order[(k + 1) % n]] = true;
        }
    }
    for (s, row) in present.iter_mut().enumerate() {
        for (d, cell) in row.iter_mut().enumerate() {
            if s != d && !*cell && rng.gen_bool(density.clamp(0.0, 1.0)) {
                *cell = true;
            }
        }
    }
    let mut edges = Vec::new();
    for (s, row) in present.iter().enumerate() {
        for (d, &on) in row.iter().enumerate() {
            if on {
                let w = weights.choose(&mut rng).expect("weights is non-empty");
                edges.push((s as u32 + 1, d as u32 + 1, w.to_string()));
            }
        }
    }
    Network::new(name, agents, edges)
}

/// Counts members per size; handy for reports.
pub fn size_histogram(family: &NetworkFamily) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for n in family.members() {
        *h.entry(n.len()).or_insert(0) += 1;
    }
    h
}
