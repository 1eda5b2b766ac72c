//! k-bisimilarity between agents of a network family.
//!
//! Two pointed networks are 0-bisimilar when the agents have the same input
//! and the same multiset of out-link weights. They are (k+1)-bisimilar when
//! additionally their in-links can be matched one to one so that matched
//! links have the same weight, agree on being two-way, and come from
//! k-bisimilar senders.
//!
//! [`Bisim`] answers single queries by unfolding that definition with a
//! memo table. [`bisim_partition`] and [`stabilize`] compute whole levels by
//! signature refinement, which is how the rest of the crate uses it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Mutex;

use crate::network::{Network, NetworkFamily};

/// An agent of a family member, by member index and external id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PointedNetwork {
    pub network: usize,
    pub agent: u32,
}

impl PointedNetwork {
    pub fn new(network: usize, agent: u32) -> Self {
        PointedNetwork { network, agent }
    }
}

impl fmt::Display for PointedNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(N{},{})", self.network, self.agent)
    }
}

/// Flat numbering of every (member, agent) pair of a family.
#[derive(Debug, Clone)]
struct Index {
    offsets: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

impl Index {
    fn new(family: &NetworkFamily) -> Index {
        let mut offsets = Vec::with_capacity(family.len());
        let mut pairs = Vec::new();
        for (m, net) in family.members().iter().enumerate() {
            offsets.push(pairs.len());
            pairs.extend((0..net.len()).map(|a| (m, a)));
        }
        Index { offsets, pairs }
    }

    fn flat(&self, family: &NetworkFamily, p: PointedNetwork) -> usize {
        let net = family.get(p.network);
        let a = net
            .index_of(p.agent)
            .unwrap_or_else(|| panic!("agent {} is not in {}", p.agent, net.name()));
        self.offsets[p.network] + a
    }

    fn pointed(&self, family: &NetworkFamily, x: usize) -> PointedNetwork {
        let (m, a) = self.pairs[x];
        PointedNetwork::new(m, family.get(m).id(a))
    }
}

/// The classes of one level of the relation over all pairs of a family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BisimPartition {
    pub level: usize,
    /// Blocks in order of their first member; members sorted.
    pub blocks: Vec<Vec<PointedNetwork>>,
}

impl BisimPartition {
    pub fn block_of(&self, p: PointedNetwork) -> Option<usize> {
        self.blocks.iter().position(|b| b.binary_search(&p).is_ok())
    }

    pub fn same_block(&self, p: PointedNetwork, q: PointedNetwork) -> bool {
        match self.block_of(p) {
            Some(b) => self.blocks[b].binary_search(&q).is_ok(),
            None => false,
        }
    }

    /// Every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &BisimPartition) -> bool {
        self.blocks.iter().all(|b| {
            let home = coarser.block_of(b[0]);
            home.is_some() && b.iter().all(|&p| coarser.block_of(p) == home)
        })
    }
}

fn local_key(net: &Network, a: usize) -> (String, Vec<String>) {
    (net.input(a).to_string(), net.out_weights(a).into_iter().map(str::to_string).collect())
}

/// Class numbers of every pair, level by level.
fn refine(family: &NetworkFamily, index: &Index, levels: usize) -> Vec<Vec<usize>> {
    let renumber = |keys: Vec<_>| -> Vec<usize> {
        let mut ids = HashMap::new();
        keys.into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect()
    };
    let base: Vec<usize> = renumber(
        index.pairs.iter().map(|&(m, a)| local_key(family.get(m), a)).collect::<Vec<_>>(),
    );
    let mut out = vec![base];
    for _ in 0..levels {
        let next = refine_step(family, index, &out[0], out.last().unwrap());
        out.push(next);
    }
    out
}

fn partition_from(family: &NetworkFamily, index: &Index, level: usize, classes: &[usize]) -> BisimPartition {
    let mut blocks: BTreeMap<usize, Vec<PointedNetwork>> = BTreeMap::new();
    for (x, &c) in classes.iter().enumerate() {
        blocks.entry(c).or_default().push(index.pointed(family, x));
    }
    let mut blocks: Vec<_> = blocks.into_values().collect();
    for b in &mut blocks {
        b.sort();
    }
    blocks.sort();
    BisimPartition { level, blocks }
}

fn count(classes: &[usize]) -> usize {
    classes.iter().max().map_or(0, |m| m + 1)
}

/// The classes of the level-`k` relation.
pub fn bisim_partition(family: &NetworkFamily, k: usize) -> BisimPartition {
    let index = Index::new(family);
    let levels = refine(family, &index, k);
    partition_from(family, &index, k, &levels[k])
}

/// Smallest level at which refinement stops, with its partition; the
/// relation is the same at every higher level.
pub fn stabilize(family: &NetworkFamily) -> (usize, BisimPartition) {
    let index = Index::new(family);
    let levels = to_fixpoint(family, &index);
    let k = levels.len() - 1;
    (k, partition_from(family, &index, k, &levels[k]))
}

/// Levels `0..=k_star`.
fn to_fixpoint(family: &NetworkFamily, index: &Index) -> Vec<Vec<usize>> {
    let mut levels = refine(family, index, 0);
    loop {
        let k = levels.len() - 1;
        // Refinement never merges classes, so an equal count means an equal
        // partition, and the step map is deterministic from there on.
        let more = refine_step(family, index, &levels[0], &levels[k]);
        if count(&more) == count(&levels[k]) {
            return levels;
        }
        levels.push(more);
    }
}

fn refine_step(family: &NetworkFamily, index: &Index, base: &[usize], prev: &[usize]) -> Vec<usize> {
    let mut ids = HashMap::new();
    index
        .pairs
        .iter()
        .enumerate()
        .map(|(x, &(m, a))| {
            let net = family.get(m);
            let mut sig: Vec<(String, bool, usize)> = net
                .in_edges(a)
                .map(|e| (e.weight.clone(), net.has_edge(a, e.src), prev[index.offsets[m] + e.src]))
                .collect();
            sig.sort();
            let next = ids.len();
            *ids.entry((base[x], sig)).or_insert(next)
        })
        .collect()
}

/// Level 0: same input, same out-weight multiset.
pub fn bisim0(family: &NetworkFamily, p: PointedNetwork, q: PointedNetwork) -> bool {
    let (a, b) = (family.get(p.network), family.get(q.network));
    let (i, j) = (a.index_of(p.agent), b.index_of(q.agent));
    match (i, j) {
        (Some(i), Some(j)) => local_key(a, i) == local_key(b, j),
        _ => false,
    }
}

/// Query object over one family. Single queries follow the definition
/// literally; levels past the fixpoint are answered from the stable
/// partition.
pub struct Bisim<'a> {
    family: &'a NetworkFamily,
    index: Index,
    k_star: usize,
    stable: Vec<usize>,
    memo: Mutex<HashMap<(usize, usize, usize), bool>>,
}

impl<'a> Bisim<'a> {
    pub fn new(family: &'a NetworkFamily) -> Self {
        let index = Index::new(family);
        let mut levels = to_fixpoint(family, &index);
        let k_star = levels.len() - 1;
        Bisim { family, index, k_star, stable: levels.pop().unwrap(), memo: Mutex::new(HashMap::new()) }
    }

    pub fn family(&self) -> &NetworkFamily {
        self.family
    }

    pub fn k_star(&self) -> usize {
        self.k_star
    }

    /// Every pointed network of the family, in member then agent order.
    pub fn pairs(&self) -> Vec<PointedNetwork> {
        (0..self.index.pairs.len()).map(|x| self.index.pointed(self.family, x)).collect()
    }

    pub fn bisim_k(&self, k: usize, p: PointedNetwork, q: PointedNetwork) -> bool {
        let x = self.index.flat(self.family, p);
        let y = self.index.flat(self.family, q);
        if k > self.k_star {
            return self.stable[x] == self.stable[y];
        }
        self.unfold(k, x, y)
    }

    /// Number of memoized answers so far.
    pub fn memo_len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    fn unfold(&self, k: usize, x: usize, y: usize) -> bool {
        if x == y {
            return true;
        }
        let key = (k, x.min(y), x.max(y));
        if let Some(&v) = self.memo.lock().unwrap().get(&key) {
            return v;
        }
        let v = self.unfold_uncached(k, x, y);
        self.memo.lock().unwrap().insert(key, v);
        v
    }

    fn unfold_uncached(&self, k: usize, x: usize, y: usize) -> bool {
        let (m1, a1) = self.index.pairs[x];
        let (m2, a2) = self.index.pairs[y];
        let (n1, n2) = (self.family.get(m1), self.family.get(m2));
        if local_key(n1, a1) != local_key(n2, a2) {
            return false;
        }
        if k == 0 {
            return true;
        }
        let ins = |net: &Network, m: usize, a: usize| -> Vec<(String, bool, usize)> {
            net.in_edges(a)
                .map(|e| (e.weight.clone(), net.has_edge(a, e.src), self.index.offsets[m] + e.src))
                .collect()
        };
        let left = ins(n1, m1, a1);
        let right = ins(n2, m2, a2);
        if left.len() != right.len() {
            return false;
        }
        let compatible = |l: &(String, bool, usize), r: &(String, bool, usize)| {
            l.0 == r.0 && l.1 == r.1 && self.unfold(k - 1, l.2, r.2)
        };
        perfect_matching(left.len(), |i, j| compatible(&left[i], &right[j]))
    }
}

/// Whether the bipartite graph on `n + n` nodes given by `edge` has a
/// perfect matching (augmenting paths).
pub(crate) fn perfect_matching(n: usize, mut edge: impl FnMut(usize, usize) -> bool) -> bool {
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| edge(i, j)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    (0..n).all(|i| augment(i, &adj, &mut owner, &mut vec![false; n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;

    fn fig_pair() -> NetworkFamily {
        let small = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
        let big = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
        NetworkFamily::new("pair", vec![small, big]).unwrap()
    }

    #[test]
    fn doubled_ring_is_indistinguishable() {
        let fam = fig_pair();
        let b = Bisim::new(&fam);
        for k in 0..=20 {
            assert!(b.bisim_k(k, PointedNetwork::new(0, 1), PointedNetwork::new(1, 4)));
            assert!(!b.bisim_k(k, PointedNetwork::new(0, 1), PointedNetwork::new(1, 2)));
        }
        let p = bisim_partition(&fam, 5);
        assert_eq!(p.blocks.len(), 3);
        assert!(p.blocks.iter().all(|b| b.len() == 3));
    }

    #[test]
    fn depth_two_separates_rings() {
        let x = Network::uni_ring("x", &["a", "b", "c"], "w").unwrap();
        let y = Network::uni_ring("y", &["a", "b", "d"], "w").unwrap();
        let fam = NetworkFamily::new("two", vec![x, y]).unwrap();
        let b = Bisim::new(&fam);
        let (p, q) = (PointedNetwork::new(0, 1), PointedNetwork::new(1, 1));
        assert!(b.bisim_k(1, p, q));
        assert!(!b.bisim_k(2, p, q));
    }

    #[test]
    fn symmetric_ring_never_splits() {
        let fam = NetworkFamily::new("one", vec![Network::uni_ring("s", &["x", "x", "x"], "w").unwrap()]).unwrap();
        let (k, part) = stabilize(&fam);
        assert_eq!(k, 0);
        assert_eq!(part.blocks.len(), 1);
        assert_eq!(part.blocks[0].len(), 3);
    }

    #[test]
    fn matching_needs_augmenting_paths() {
        // Greedy would pair 0-0 and strand 1.
        let ok = [[true, true], [true, false]];
        assert!(perfect_matching(2, |i, j| ok[i][j]));
        let bad = [[true, false], [true, false]];
        assert!(!perfect_matching(2, |i, j| bad[i][j]));
    }
}
