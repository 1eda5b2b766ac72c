//! What happened in a ring run: which send each receive matches, causal
//! order, the intervals agents have heard from, and checks of the
//! structural properties the halving protocols are known to have.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::peterson::{loop_outcome, Halving, P2Prime};
use super::{ring_topology, Side, FROM_R};
use crate::runtime::{run_protocol, Event, LocalEvent, Program, Run, Scheduler};

/// For every log entry that is a receive, the sender and the index of the
/// matching send in the sender's log. Within a channel a receive matches
/// the oldest unmatched send of an equal message, which is the FIFO match
/// when channels are FIFO and indistinguishable from it otherwise.
pub fn message_sources<P: Program>(run: &Run<P>) -> Vec<Vec<Option<(usize, usize)>>> {
    let t = &run.topology;
    let n = t.len();
    let mut pending: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for a in 0..n {
        for (ix, e) in run.logs[a].iter().enumerate() {
            if let LocalEvent::Send { port, .. } = e {
                pending.entry((a, *port)).or_default().push(ix);
            }
        }
    }
    let mut out = vec![Vec::new(); n];
    for b in 0..n {
        for e in &run.logs[b] {
            let LocalEvent::Recv { port, msg } = e else {
                out[b].push(None);
                continue;
            };
            let (a, p) = t.source(b, *port);
            let queue = pending.get_mut(&(a, p)).expect("receive without a send");
            let k = queue
                .iter()
                .position(|&ix| matches!(&run.logs[a][ix], LocalEvent::Send { msg: m, .. } if m == msg))
                .expect("receive without a matching send");
            out[b].push(Some((a, queue.remove(k))));
        }
    }
    out
}

/// Vector clock after each log entry of each agent.
pub fn vector_clocks<P: Program>(run: &Run<P>) -> Vec<Vec<Vec<usize>>> {
    let n = run.topology.len();
    let sources = message_sources(run);
    let mut clocks: Vec<Vec<Vec<usize>>> = vec![Vec::new(); n];
    loop {
        let mut progress = false;
        for a in 0..n {
            while clocks[a].len() < run.logs[a].len() {
                let ix = clocks[a].len();
                let mut c = clocks[a].last().cloned().unwrap_or_else(|| vec![0; n]);
                if let Some((src, six)) = sources[a][ix] {
                    let Some(sc) = clocks[src].get(six) else { break };
                    for (x, y) in c.iter_mut().zip(sc) {
                        *x = (*x).max(*y);
                    }
                }
                c[a] += 1;
                clocks[a].push(c);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    assert!((0..n).all(|a| clocks[a].len() == run.logs[a].len()), "causal cycle in run");
    clocks
}

fn before(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a != b
}

/// Left and right intervals of one agent, as ring positions in order
/// going outward from the agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intervals {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl Intervals {
    /// The two intervals meet somewhere other than at their owner.
    pub fn has_all_info(&self) -> bool {
        let own = self.left[0];
        self.left.iter().any(|k| *k != own && self.right.contains(k))
    }

    pub fn heard_from_all(&self, n: usize) -> bool {
        let all: BTreeSet<_> = self.left.iter().chain(&self.right).collect();
        all.len() == n
    }
}

/// `states[i][k]`: agent `i`'s intervals after processing `k` messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalState {
    pub n: usize,
    pub states: Vec<Vec<Intervals>>,
}

impl IntervalState {
    pub fn at(&self, agent: usize, processed: usize) -> &Intervals {
        &self.states[agent][processed]
    }

    /// Messages the agent had processed when it first had all the
    /// information.
    pub fn learned_at(&self, agent: usize) -> Option<usize> {
        self.states[agent].iter().position(Intervals::has_all_info)
    }
}

fn ordered(set: &BTreeSet<usize>, own: usize, n: usize, side: Side) -> Vec<usize> {
    let mut v: Vec<usize> = set.iter().copied().collect();
    v.sort_by_key(|&k| match side {
        Side::R => (k + n - own) % n,
        Side::L => (own + n - k) % n,
    });
    v
}

/// Intervals by the recurrences: processing from the right adds what the
/// right neighbour had when it sent, minus the neighbour itself on the
/// left side; symmetrically from the left.
pub fn track_intervals<P: Program>(run: &Run<P>) -> IntervalState {
    let t = &run.topology;
    let n = t.len();
    assert!(
        (0..n).all(|a| t.context(a).out_ports.len() == 2 && t.wire(a, 0).0 == (a + n - 1) % n),
        "interval tracking needs a bidirectional ring"
    );
    let sources = message_sources(run);
    // Per agent and log entry: the intervals in force after the entry.
    let mut sets: Vec<Vec<(BTreeSet<usize>, BTreeSet<usize>)>> = vec![Vec::new(); n];
    let init = |a: usize| (BTreeSet::from([a]), BTreeSet::from([a]));
    loop {
        let mut progress = false;
        for a in 0..n {
            while sets[a].len() < run.logs[a].len() {
                let ix = sets[a].len();
                let prev = sets[a].last().cloned().unwrap_or_else(|| init(a));
                let next = match (&run.logs[a][ix], sources[a][ix]) {
                    (LocalEvent::Recv { port, .. }, Some((src, six))) => {
                        let Some(_) = sets[src].get(six) else { break };
                        let (sl, sr) = sets[src][six].clone();
                        let (mut l, mut r) = prev;
                        if *port == FROM_R {
                            r.extend(sr);
                            l.extend(sl.into_iter().filter(|&k| k != src));
                        } else {
                            l.extend(sl);
                            r.extend(sr.into_iter().filter(|&k| k != src));
                        }
                        (l, r)
                    }
                    _ => prev,
                };
                sets[a].push(next);
                progress = true;
            }
        }
        if !progress {
            break;
        }
    }
    let states = (0..n)
        .map(|a| {
            let mut v = vec![init(a)];
            for (e, s) in run.logs[a].iter().zip(&sets[a]) {
                if matches!(e, LocalEvent::Recv { .. }) {
                    v.push(s.clone());
                }
            }
            v.into_iter()
                .map(|(l, r)| Intervals { left: ordered(&l, a, n, Side::L), right: ordered(&r, a, n, Side::R) })
                .collect()
        })
        .collect();
    IntervalState { n, states }
}

/// Agents that can be first to know the whole ring, by position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstLearners {
    pub agents: Vec<usize>,
    pub ids: Vec<u32>,
    /// Whether each was still active when it learned.
    pub active: Vec<bool>,
}

/// An agent can be first when no other agent's learning causally precedes
/// its own. Agents learn at the same point of their own history whatever
/// the schedule, so one run settles it.
pub fn first_learners(ids: &[u32]) -> FirstLearners {
    let out = loop_outcome(ids);
    let agents = out.first.clone();
    let max = ids.iter().copied().max().unwrap_or(0);
    FirstLearners {
        ids: agents.iter().map(|&k| ids[k]).collect(),
        // Status just after learning. By then the agent knows every id, so
        // it stays active exactly when its own id is the largest.
        active: agents.iter().map(|&k| out.learning[k].is_some() && ids[k] == max).collect(),
        agents,
    }
}

/// Agents seen learning first in sampled schedules of the loop.
pub fn first_learners_sampled(ids: &[u32], seeds: impl IntoIterator<Item = u64>) -> BTreeSet<usize> {
    let topo = ring_topology(ids, true);
    let mut seen = BTreeSet::new();
    for seed in seeds {
        let run = run_protocol(&topo, &P2Prime::halting(), Scheduler::fifo_async(seed), 1_000_000)
            .expect("the loop halts");
        let first = run.learned.iter().filter_map(|l| l.as_ref().map(|(s, _)| *s)).min();
        for (k, l) in run.learned.iter().enumerate() {
            if l.as_ref().map(|(s, _)| *s) == first {
                seen.insert(k);
            }
        }
    }
    seen
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageStats {
    pub protocol: String,
    pub ring: String,
    pub messages: usize,
    /// Messages by the sender's send count at the time: entry `p` counts
    /// the `p+1`st message of each agent.
    pub per_phase: Vec<usize>,
    pub per_kind: BTreeMap<&'static str, usize>,
    pub bytes: usize,
    pub steps: usize,
}

pub fn message_stats<P: Program>(run: &Run<P>) -> MessageStats {
    let mut per_phase = Vec::new();
    let mut sent = vec![0usize; run.topology.len()];
    let mut per_kind = BTreeMap::new();
    for e in &run.events {
        if let Event::Send { src, kind, .. } = e {
            let p = sent[*src];
            sent[*src] += 1;
            if per_phase.len() <= p {
                per_phase.resize(p + 1, 0);
            }
            per_phase[p] += 1;
            *per_kind.entry(*kind).or_default() += 1;
        }
    }
    MessageStats {
        protocol: run.protocol.clone(),
        ring: run.topology.name().to_string(),
        messages: run.messages(),
        per_phase,
        per_kind,
        bytes: run.bytes(),
        steps: run.steps,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaViolation {
    pub lemma: &'static str,
    pub agent: usize,
    pub detail: String,
}

impl fmt::Display for LemmaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} agent={} {}", self.lemma, self.agent, self.detail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Act {
    Sl,
    Sr,
    Pl,
    Pr,
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Act::Sl => "SL",
            Act::Sr => "SR",
            Act::Pl => "PL",
            Act::Pr => "PR",
        })
    }
}

fn act(e: &LocalEvent<impl Clone>) -> Act {
    match e {
        LocalEvent::Send { port, .. } if *port == Side::L.out_port() => Act::Sl,
        LocalEvent::Send { .. } => Act::Sr,
        LocalEvent::Recv { port, .. } if *port == FROM_R => Act::Pr,
        LocalEvent::Recv { .. } => Act::Pl,
    }
}

/// Log entries that happened before the agent knew it had all the
/// information: everything up to and including the processing that told
/// it, but not what it sent in response.
fn before_knowing(log_len: usize, log: &[LocalEvent<impl Clone>], learned_at: Option<usize>) -> usize {
    let Some(k) = learned_at else { return log_len };
    let mut seen = 0;
    for (ix, e) in log.iter().enumerate() {
        if matches!(e, LocalEvent::Recv { .. }) {
            seen += 1;
            if seen == k {
                return ix + 1;
            }
        }
    }
    log_len
}

/// While active, an agent's actions follow SL, PR, SR, PL repeatedly; once
/// it turns passive after processing from the right they follow PL, SR,
/// PR, SL, and the mirror image after processing from the left.
pub fn check_order_lemma<P: Halving>(run: &Run<P>) -> Vec<LemmaViolation> {
    let iv = track_intervals(run);
    let mut out = Vec::new();
    const ACTIVE: [Act; 4] = [Act::Sl, Act::Pr, Act::Sr, Act::Pl];
    const AFTER_PR: [Act; 4] = [Act::Pl, Act::Sr, Act::Pr, Act::Sl];
    const AFTER_PL: [Act; 4] = [Act::Pr, Act::Sl, Act::Pl, Act::Sr];
    for (a, prog) in run.programs.iter().enumerate() {
        let log = &run.logs[a];
        let upto = before_knowing(log.len(), log, iv.learned_at(a));
        let hist = prog.active_history();
        let mut pattern: &[Act; 4] = &ACTIVE;
        let mut pos = 0;
        let mut processed = 0;
        let mut acts = Vec::new();
        for e in &log[..upto] {
            let x = act(e);
            acts.push(x);
            if pattern[pos % 4] != x {
                let s: Vec<String> = acts.iter().map(Act::to_string).collect();
                out.push(LemmaViolation { lemma: "order", agent: a, detail: s.join(",") });
                break;
            }
            pos += 1;
            if matches!(x, Act::Pr | Act::Pl) {
                processed += 1;
                let was = processed < 2 || hist[processed - 2];
                if was && !hist[processed - 1] {
                    pattern = if x == Act::Pr { &AFTER_PR } else { &AFTER_PL };
                    pos = 0;
                }
            }
        }
    }
    out
}

fn contiguous(v: &[usize], own: usize, n: usize, side: Side) -> bool {
    v.iter().enumerate().all(|(d, &k)| match side {
        Side::R => k == (own + d) % n,
        Side::L => k == (own + n - d) % n,
    })
}

/// Intervals are contiguous, grow on the side a message comes from by
/// exactly the sender's interval, stay put on the other side, and an agent
/// is active exactly when it holds the largest id it has heard of.
pub fn check_interval_lemmas<P: Halving>(run: &Run<P>) -> Vec<LemmaViolation> {
    let iv = track_intervals(run);
    let n = iv.n;
    let sources = message_sources(run);
    let ids: Vec<u32> = run.programs.iter().map(Halving::id).collect();
    let mut out = Vec::new();
    let mut bad = |lemma: &'static str, agent: usize, detail: String| {
        out.push(LemmaViolation { lemma, agent, detail });
    };
    for a in 0..n {
        let learned = iv.learned_at(a);
        let hist = run.programs[a].active_history();
        let mut processed = 0;
        for (ix, e) in run.logs[a].iter().enumerate() {
            let LocalEvent::Recv { port, .. } = e else { continue };
            processed += 1;
            if learned.is_some_and(|k| processed > k) {
                break;
            }
            let now = iv.at(a, processed);
            let prev = iv.at(a, processed - 1);
            if !contiguous(&now.left, a, n, Side::L) || !contiguous(&now.right, a, n, Side::R) {
                bad("contiguity", a, format!("after {processed}: L={:?} R={:?}", now.left, now.right));
            }
            let (src, six) = sources[a][ix].unwrap();
            let sent_at = run.logs[src][..six].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count();
            let sender = iv.at(src, sent_at);
            if !sender.has_all_info() {
                let (grow, keep, sgrow) = if *port == FROM_R {
                    (&now.right, (&now.left, &prev.left), &sender.right)
                } else {
                    (&now.left, (&now.right, &prev.right), &sender.left)
                };
                let old = if *port == FROM_R { &prev.right } else { &prev.left };
                let mut expect = vec![a];
                expect.extend(sgrow);
                if grow.len() <= old.len() || *grow != expect {
                    bad("growth", a, format!("after {processed}: {old:?} -> {grow:?}, sender had {sgrow:?}"));
                }
                if keep.0 != keep.1 {
                    bad("other-side", a, format!("after {processed}: {:?} -> {:?}", keep.1, keep.0));
                }
            }
            let top = now.left.iter().chain(&now.right).map(|&k| ids[k]).max().unwrap();
            if hist[processed - 1] != (top == ids[a]) {
                bad("active-iff-max", a, format!("after {processed}: active={} max heard={top}", hist[processed - 1]));
            }
        }
    }
    out
}

/// The `p`th message an agent processes from one side originated with the
/// nearest active agent on that side as its `p`th send that way, and the
/// receiver's interval is that agent's plus the relays in between.
pub fn check_phase_lemma<P: Halving>(run: &Run<P>) -> Vec<LemmaViolation> {
    let iv = track_intervals(run);
    let n = iv.n;
    let sources = message_sources(run);
    let mut out = Vec::new();
    // Status of an agent when it made the send at log index `ix`.
    let active_at = |a: usize, ix: usize| -> bool {
        let k = run.logs[a][..ix].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count();
        k == 0 || run.programs[a].active_history()[k - 1]
    };
    let knew_at = |a: usize, ix: usize| -> bool {
        let k = run.logs[a][..ix].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count();
        iv.at(a, k).has_all_info()
    };
    for a in 0..n {
        let mut count = [0usize; 2];
        for (ix, e) in run.logs[a].iter().enumerate() {
            let LocalEvent::Recv { port, .. } = e else { continue };
            count[*port] += 1;
            let p = count[*port];
            // Walk back to the originator through the relays.
            let (mut src, mut six) = sources[a][ix].unwrap();
            let mut path = vec![a];
            let mut clean = true;
            loop {
                path.push(src);
                clean &= !knew_at(src, six);
                if active_at(src, six) || path.len() > n + 1 {
                    break;
                }
                let Some(r) = run.logs[src][..six].iter().rposition(|e| matches!(e, LocalEvent::Recv { .. })) else {
                    break;
                };
                let (s2, i2) = sources[src][r].unwrap();
                src = s2;
                six = i2;
            }
            if !clean || path.len() > n + 1 {
                continue;
            }
            let out_port = if *port == FROM_R { Side::L.out_port() } else { Side::R.out_port() };
            let nth = run.logs[src][..=six]
                .iter()
                .filter(|e| matches!(e, LocalEvent::Send { port, .. } if *port == out_port))
                .count();
            if nth != p {
                out.push(LemmaViolation {
                    lemma: "phase",
                    agent: a,
                    detail: format!("message {p} from {} originated as send {nth} of {src}", Side::of_in_port(*port)),
                });
                continue;
            }
            let k = run.logs[a][..=ix].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count();
            let ks = run.logs[src][..six].iter().filter(|e| matches!(e, LocalEvent::Recv { .. })).count();
            let (mine, theirs) = if *port == FROM_R {
                (&iv.at(a, k).right, &iv.at(src, ks).right)
            } else {
                (&iv.at(a, k).left, &iv.at(src, ks).left)
            };
            let mut expect: BTreeSet<usize> = theirs.iter().copied().collect();
            expect.extend(path.iter().copied());
            if mine.iter().copied().collect::<BTreeSet<_>>() != expect {
                out.push(LemmaViolation {
                    lemma: "phase-interval",
                    agent: a,
                    detail: format!("message {p}: {mine:?} vs {:?}", expect),
                });
            }
        }
    }
    out
}

/// Interval states agree between two runs on the same ring at equal
/// processed counts, as long as no learning lies in the agent's causal
/// past in either run.
pub fn schedule_independence<P: Halving>(a: &Run<P>, b: &Run<P>) -> Vec<LemmaViolation> {
    let (ia, ib) = (track_intervals(a), track_intervals(b));
    let horizon = |run: &Run<P>, iv: &IntervalState| -> Vec<usize> {
        // Per agent, how many of its processed messages precede any
        // learning in causal order.
        let clocks = vector_clocks(run);
        let n = iv.n;
        let events: Vec<Option<Vec<usize>>> = (0..n)
            .map(|j| {
                let k = iv.learned_at(j)?;
                let mut seen = 0;
                run.logs[j].iter().enumerate().find_map(|(ix, e)| {
                    if matches!(e, LocalEvent::Recv { .. }) {
                        seen += 1;
                        (seen == k).then(|| clocks[j][ix].clone())
                    } else {
                        None
                    }
                })
            })
            .collect();
        (0..n)
            .map(|i| {
                let mut ok = 0;
                for (ix, e) in run.logs[i].iter().enumerate() {
                    if !matches!(e, LocalEvent::Recv { .. }) {
                        continue;
                    }
                    let c = &clocks[i][ix];
                    if events.iter().flatten().any(|ej| before(ej, c) || ej == c) {
                        break;
                    }
                    ok += 1;
                }
                ok
            })
            .collect()
    };
    let (ha, hb) = (horizon(a, &ia), horizon(b, &ib));
    let mut out = Vec::new();
    for i in 0..ia.n {
        for k in 0..=ha[i].min(hb[i]) {
            if ia.at(i, k) != ib.at(i, k) {
                out.push(LemmaViolation {
                    lemma: "schedule",
                    agent: i,
                    detail: format!("after {k}: {:?} vs {:?}", ia.at(i, k), ib.at(i, k)),
                });
                break;
            }
        }
    }
    out
}

/// A random permutation of `1..=n`, for tests and benchmarks.
pub fn shuffled_ids(n: usize, seed: u64) -> Vec<u32> {
    let mut ids: Vec<u32> = (1..=n as u32).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids
}
