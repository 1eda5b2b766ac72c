use std::collections::{BTreeSet, VecDeque};

use gfc::network::{generate_family, random_strongly_connected, FamilySpec, GlobalFunction, Network, NetworkFamily};
use gfc::runtime::{
    full_information, pg_gc, run_protocol, transcript, Event, KnowledgeFragment, LocalInfo, Scheduler, Topology,
};
use gfc::solvability::is_solvable;
use proptest::prelude::*;

fn topo(net: &Network) -> Topology {
    Topology::from_network(net)
}

// Agents that can reach `target` in at most `k` hops.
fn within(net: &Network, target: usize, k: usize) -> BTreeSet<usize> {
    let mut dist = vec![usize::MAX; net.len()];
    dist[target] = 0;
    let mut queue = VecDeque::from([target]);
    while let Some(v) = queue.pop_front() {
        for e in net.in_edges(v) {
            if dist[e.src] == usize::MAX {
                dist[e.src] = dist[v] + 1;
                queue.push_back(e.src);
            }
        }
    }
    (0..net.len()).filter(|&j| dist[j] <= k).collect()
}

#[test]
fn pg_gc_on_a_distinct_three_ring() {
    let net = Network::uni_ring("abc", &["a", "b", "c"], "w").unwrap();
    let fam = generate_family(&FamilySpec::uni_rings(3, &["a", "b", "c"], &["w"])).unwrap();
    let p = pg_gc(&fam, &GlobalFunction::multiset_inputs()).unwrap();
    let run = run_protocol(&topo(&net), &p, Scheduler::sync(), 100).unwrap();
    assert_eq!(run.messages(), run.deliveries());
    for (a, prog) in run.programs.iter().enumerate() {
        assert_eq!(prog.view().locals().len(), 3, "agent {a}");
        assert_eq!(run.learned[a].as_ref().unwrap().1.as_str(), "{a,b,c}");
    }
}

#[test]
fn zero_budget_is_an_error() {
    let net = Network::new(
        "edge",
        vec![
            gfc::network::Agent { id: 1, input: "a".into() },
            gfc::network::Agent { id: 2, input: "b".into() },
        ],
        vec![(1, 2, "1".into())],
    )
    .unwrap();
    let err = run_protocol(&topo(&net), &full_information(2), Scheduler::sync(), 0).unwrap_err();
    assert_eq!(err.partial().steps, 0);
    let err = run_protocol(&topo(&net), &full_information(2), Scheduler::fifo_async(1), 0).unwrap_err();
    assert_eq!(err.partial().deliveries(), 0);
}

#[test]
fn first_message_is_the_initial_info() {
    let net = Network::bi_ring("b", &["x", "y", "z"], "1").unwrap();
    let run = run_protocol(&topo(&net), &full_information(3), Scheduler::sync(), 100).unwrap();
    for a in 0..3 {
        let first = transcript(&run, a, 1).unwrap();
        assert_eq!(first.len(), 2);
        for m in first {
            assert_eq!(m.view.depth(), 0);
            assert!(m.view.children().is_empty());
        }
        assert!(transcript(&run, a, 0).unwrap().is_empty());
        assert!(transcript(&run, a, 4).is_none());
    }
}

#[test]
fn uni_ring_agents_hear_only_their_in_neighbour() {
    let net = Network::uni_ring("abc", &["a", "b", "c"], "w").unwrap();
    let run = run_protocol(&topo(&net), &full_information(2), Scheduler::sync(), 100).unwrap();
    let got = transcript(&run, 0, 1).unwrap();
    assert_eq!(got.len(), 1);
    // Uni-rings point left, so agent 0 hears from agent 1.
    assert_eq!(got[0].view.local(), LocalInfo::of_agent(&net, 1));
    // After two rounds agent 0 has heard of everyone on a ring of three.
    assert_eq!(run.programs[0].view().locals().len(), 3);
}

#[test]
fn doubled_ring_transcripts_coincide() {
    let tri = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
    let hex = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
    let r3 = run_protocol(&topo(&tri), &full_information(6), Scheduler::sync(), 100).unwrap();
    let r6 = run_protocol(&topo(&hex), &full_information(6), Scheduler::sync(), 100).unwrap();
    for k in 0..=6 {
        for a in 0..3 {
            assert_eq!(transcript(&r3, a, k), transcript(&r6, a, k));
            assert_eq!(transcript(&r3, a, k), transcript(&r6, a + 3, k));
        }
    }
}

#[test]
fn async_transcripts_match_sync() {
    let net = random_strongly_connected("r", 5, 0.3, &["1", "2"], 3).unwrap();
    let sync = run_protocol(&topo(&net), &full_information(4), Scheduler::sync(), 100).unwrap();
    for seed in 0..5 {
        let run = run_protocol(&topo(&net), &full_information(4), Scheduler::fifo_async(seed), 100_000).unwrap();
        for a in 0..net.len() {
            for k in 0..=4 {
                assert_eq!(transcript(&run, a, k), transcript(&sync, a, k), "seed {seed} agent {a} round {k}");
            }
        }
    }
}

#[test]
fn singleton_family_knows_at_the_start() {
    let net = Network::uni_ring("abc", &["a", "b", "c"], "w").unwrap();
    let fam = NetworkFamily::new("one", vec![net.clone()]).unwrap();
    let p = pg_gc(&fam, &GlobalFunction::size()).unwrap();
    let run = run_protocol(&topo(&net), &p, Scheduler::sync(), 100).unwrap();
    for l in &run.learned {
        assert_eq!(l.as_ref().unwrap().0, 0);
    }
    // Only the one final message per link.
    let kinds: BTreeSet<&str> = run
        .events
        .iter()
        .filter_map(|e| if let Event::Send { kind, .. } = e { Some(*kind) } else { None })
        .collect();
    assert_eq!(kinds, BTreeSet::from(["final"]));
    assert_eq!(run.messages(), 3);
}

#[test]
fn pg_gc_never_claims_a_wrong_size() {
    let tri = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
    let hex = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
    let fam = NetworkFamily::new("pair", vec![tri, hex]).unwrap();
    let p = pg_gc(&fam, &GlobalFunction::size()).unwrap();
    for net in fam.members() {
        let truth = GlobalFunction::size().eval(net).unwrap();
        for sched in [Scheduler::sync(), Scheduler::fifo_async(4)] {
            let run = match run_protocol(&topo(net), &p, sched, 200) {
                Ok(r) => r,
                Err(e) => e.partial().clone(),
            };
            for l in run.learned.iter().flatten() {
                assert_eq!(l.1, truth);
            }
            assert!(run.learned.iter().any(Option::is_none));
        }
    }
}

#[test]
fn pg_gc_meets_the_round_bound() {
    let fam = generate_family(&FamilySpec::bi_rings(4, &["a", "b"], &["1"])).unwrap();
    let f = GlobalFunction::custom("has_b", |n| Ok(n.agents().iter().any(|a| a.input == "b").to_string()));
    let report = is_solvable(&fam, &f).unwrap();
    assert!(report.solvable);
    let p = pg_gc(&fam, &f).unwrap();
    for (m, net) in fam.members().iter().enumerate() {
        let truth = f.eval(net).unwrap();
        let run = run_protocol(&topo(net), &p, Scheduler::sync(), 100).unwrap();
        for l in &run.learned {
            let (round, v) = l.as_ref().unwrap();
            assert_eq!(v, &truth);
            assert!(*round <= report.witness[m] + 1);
        }
    }
}

#[test]
fn fragments_merge_idempotently() {
    let net = Network::bi_ring("b", &["1", "2", "3", "4"], "1").unwrap();
    let views = KnowledgeFragment::of_network(&net, 3);
    for d in 0..=3 {
        for a in 0..4 {
            let v = views[d][a];
            assert_eq!(v.merge(v), v);
            if d > 0 {
                assert_eq!(v.truncate(d as u32 - 1), views[d - 1][a]);
                assert_eq!(v.merge(views[d - 1][a]), v);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sync_views_cover_exactly_the_k_neighbourhood(n in 1usize..=6, seed in any::<u64>(), d in 0.0f64..0.5) {
        let net = random_strongly_connected("r", n, d, &["1", "2"], seed).unwrap();
        let run = run_protocol(&topo(&net), &full_information(4), Scheduler::sync(), 100).unwrap();
        let views = KnowledgeFragment::of_network(&net, 4);
        for a in 0..n {
            for k in 0..=4 {
                let expect: BTreeSet<LocalInfo> =
                    within(&net, a, k).into_iter().map(|j| LocalInfo::of_agent(&net, j)).collect();
                prop_assert_eq!(views[k][a].locals(), expect);
            }
            prop_assert_eq!(run.programs[a].view(), views[4][a]);
        }
    }

    #[test]
    fn quiescent_runs_deliver_everything_once(n in 1usize..=6, seed in any::<u64>(), fifo in any::<bool>()) {
        let net = random_strongly_connected("r", n, 0.3, &["1", "2"], seed).unwrap();
        let sched = if fifo { Scheduler::fifo_async(seed) } else { Scheduler::unordered_async(seed) };
        let run = run_protocol(&topo(&net), &full_information(3), sched, 100_000).unwrap();
        prop_assert_eq!(run.messages(), run.deliveries());
        prop_assert_eq!(run.unprocessed, 0);
        let again = run_protocol(&topo(&net), &full_information(3), sched, 100_000).unwrap();
        prop_assert_eq!(run.trace(), again.trace());
        prop_assert_eq!(run.events, again.events);
    }
}
