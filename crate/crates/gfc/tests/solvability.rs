use gfc::bisim::{Bisim, PointedNetwork};
use gfc::network::{generate_family, random_strongly_connected, FamilySpec, GlobalFunction, Network, NetworkFamily};
use gfc::solvability::{check_diameter_bound, is_solvable, BoundError};
use proptest::prelude::*;

fn fig_pair() -> NetworkFamily {
    let small = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
    let big = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
    NetworkFamily::new("pair", vec![small, big]).unwrap()
}

// Least k such that every agent of member `m` is k-bisimilar only to
// agents of networks with the same value, by pairwise queries.
fn witness_oracle(fam: &NetworkFamily, f: &GlobalFunction, m: usize) -> Option<usize> {
    let b = Bisim::new(fam);
    let vals: Vec<_> = fam.members().iter().map(|n| f.eval(n).unwrap()).collect();
    let pairs = b.pairs();
    (0..=b.k_star()).find(|&k| {
        pairs.iter().filter(|p| p.network == m).all(|&p| {
            pairs.iter().all(|&q| !b.bisim_k(k, p, q) || vals[q.network] == vals[m])
        })
    })
}

#[test]
fn doubled_ring_cannot_learn_its_size() {
    let r = is_solvable(&fig_pair(), &GlobalFunction::size()).unwrap();
    assert!(!r.solvable);
    let c = r.counterexample.as_ref().unwrap();
    assert_ne!(c.p.network, c.q.network);
    assert!(Bisim::new(&fig_pair()).bisim_k(c.k_star, c.p, c.q));
    let text = r.to_string();
    assert!(text.contains("solvable no"), "{text}");
    assert!(text.contains("counterexample tri:"), "{text}");
}

#[test]
fn distinct_three_rings_learn_their_multiset() {
    let fam = generate_family(&FamilySpec::uni_rings(3, &["a", "b", "c"], &["1"])).unwrap();
    let three: Vec<Network> = fam
        .members()
        .iter()
        .filter(|n| {
            let mut v: Vec<&str> = n.agents().iter().map(|a| a.input.as_str()).collect();
            v.sort();
            v.dedup();
            n.len() == 3 && v.len() == 3
        })
        .cloned()
        .collect();
    assert_eq!(three.len(), 2);
    let fam = NetworkFamily::new("distinct", three).unwrap();
    assert!(is_solvable(&fam, &GlobalFunction::multiset_inputs()).unwrap().solvable);
}

#[test]
fn singleton_family_needs_nothing() {
    let fam = NetworkFamily::new("one", vec![Network::bi_ring("b", &["1", "1", "2"], "1").unwrap()]).unwrap();
    for f in GlobalFunction::catalog() {
        let r = is_solvable(&fam, &f).unwrap();
        assert!(r.solvable);
        assert_eq!(r.witness, vec![0]);
    }
}

#[test]
fn adding_the_doubled_ring_breaks_a_solvable_family() {
    let tri = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
    let other = Network::uni_ring("duo", &["a", "b"], "w").unwrap();
    let small = NetworkFamily::new("small", vec![tri.clone(), other.clone()]).unwrap();
    assert!(is_solvable(&small, &GlobalFunction::size()).unwrap().solvable);
    let hex = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
    let big = NetworkFamily::new("big", vec![tri, other, hex]).unwrap();
    assert!(!is_solvable(&big, &GlobalFunction::size()).unwrap().solvable);
}

#[test]
fn diameter_bound_on_small_id_rings() {
    let mut nets = Vec::new();
    for n in 2..=4 {
        let ids: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        nets.push(Network::uni_ring(format!("u{n}"), &ids, "1").unwrap());
    }
    let fam = NetworkFamily::new("ids", nets).unwrap();
    for f in GlobalFunction::catalog() {
        assert_eq!(check_diameter_bound(&fam, &f), Ok(true));
    }
}

#[test]
fn diameter_bound_rejects_symmetric_rings() {
    let fam = NetworkFamily::new("sym", vec![Network::uni_ring("s", &["x", "x", "x"], "1").unwrap()]).unwrap();
    let e = check_diameter_bound(&fam, &GlobalFunction::size()).unwrap_err();
    assert!(matches!(e, BoundError::LocallySame { .. }));
}

#[test]
fn witnesses_match_pairwise_queries() {
    // Covering rings agree on which inputs occur, so this is solvable.
    let fam = generate_family(&FamilySpec::uni_rings(4, &["a", "b"], &["1"])).unwrap();
    let f = GlobalFunction::custom("input_set", |n| {
        let mut xs: Vec<_> = n.agents().iter().map(|a| a.input.clone()).collect();
        xs.sort();
        xs.dedup();
        Ok(xs.join(","))
    });
    let r = is_solvable(&fam, &f).unwrap();
    assert!(r.solvable);
    for m in 0..fam.len() {
        assert_eq!(r.witness_k(m), witness_oracle(&fam, &f, m));
    }
}

fn arb_distinct_family() -> impl Strategy<Value = NetworkFamily> {
    prop::collection::vec((1usize..=5, any::<u64>(), 0.0f64..0.5), 1..=6).prop_map(|specs| {
        let nets = specs
            .into_iter()
            .map(|(n, seed, d)| random_strongly_connected(format!("r{seed}"), n, d, &["1", "2"], seed).unwrap())
            .collect();
        NetworkFamily::new("random", nets).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn report_invariants(fam in arb_distinct_family()) {
        for f in [GlobalFunction::size(), GlobalFunction::max_input(), GlobalFunction::diameter()] {
            let r = is_solvable(&fam, &f).unwrap();
            let b = Bisim::new(&fam);
            let vals: Vec<_> = fam.members().iter().map(|n| f.eval(n).unwrap()).collect();
            if r.solvable {
                for (m, &k) in r.witness.iter().enumerate() {
                    prop_assert_eq!(Some(k), witness_oracle(&fam, &f, m));
                    // Larger levels only refine.
                    for p in b.pairs().into_iter().filter(|p| p.network == m) {
                        for q in b.pairs() {
                            if b.bisim_k(k + 1, p, q) {
                                prop_assert_eq!(&vals[q.network], &vals[m]);
                            }
                        }
                    }
                }
                prop_assert_eq!(check_diameter_bound(&fam, &f), Ok(true));
            } else {
                let c = r.counterexample.unwrap();
                prop_assert!(b.bisim_k(c.k_star, c.p, c.q));
                prop_assert_ne!(&vals[c.p.network], &vals[c.q.network]);
            }
        }
    }
}

#[test]
fn counterexample_points_are_family_agents() {
    let r = is_solvable(&fig_pair(), &GlobalFunction::size()).unwrap();
    let c = r.counterexample.unwrap();
    for p in [c.p, c.q] {
        let PointedNetwork { network, agent } = p;
        assert!(fig_pair().get(network).index_of(agent).is_some());
    }
}
