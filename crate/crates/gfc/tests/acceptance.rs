//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS or FAIL line, followed by indented
//! details where a criterion reports measurements.

use std::collections::HashMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gfc::bisim::{Bisim, PointedNetwork};
use gfc::election::{
    check_interval_lemmas, check_order_lemma, check_phase_lemma, first_learners, flooding, lcr, lcr_prime,
    message_stats, p2, p2_prime, ring_topology, schedule_independence, shuffled_ids, Halving, LemmaViolation,
};
use gfc::epistemic::{build_system, distinct_id_rings, ring_universe, DeFactoReport, Policy};
use gfc::network::{
    generate_family, random_strongly_connected, FamilySpec, GlobalFunction, Network, NetworkFamily,
};
use gfc::runtime::{
    full_information, pg_gc, run_protocol, transcript, LocalInfo, Protocol, Run, Scheduler, Topology, ViewMsg,
};
use gfc::solvability::is_solvable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<Vec<String>, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fig_pair() -> NetworkFamily {
    let tri = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
    let hex = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
    NetworkFamily::new("pair", vec![tri, hex]).unwrap()
}

fn doubled_ring() -> Outcome {
    let start = Instant::now();
    let fam = fig_pair();
    let b = Bisim::new(&fam);
    for k in 0..=20 {
        for a in 1..=3u32 {
            for twin in [a, a + 3] {
                let (p, q) = (PointedNetwork::new(0, a), PointedNetwork::new(1, twin));
                ensure(b.bisim_k(k, p, q), || format!("tri:{a} and hex:{twin} differ at k={k}"))?;
            }
        }
    }
    let r = is_solvable(&fam, &GlobalFunction::size()).map_err(|e| e.to_string())?;
    ensure(!r.solvable, || "size reported solvable".into())?;
    let c = r.counterexample.as_ref().ok_or("no counterexample")?;
    ensure(c.p.network != c.q.network && b.bisim_k(20, c.p, c.q), || "counterexample is not a cross pair".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(vec![format!(
        "counterexample {}:{} f={} ~ {}:{} f={}",
        r.names[c.p.network], c.p.agent, c.fp, r.names[c.q.network], c.q.agent, c.fq
    )])
}

/// Families of random strongly connected networks with distinct inputs,
/// at least `total` networks in all, at most eight per family.
fn random_families(total: usize, seed: u64) -> Vec<NetworkFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fams = Vec::new();
    let mut count = 0;
    while count < total {
        let size = rng.gen_range(2..=8);
        let nets = (0..size)
            .map(|i| {
                let n = rng.gen_range(1..=6);
                let d = rng.gen_range(0.0..0.6);
                random_strongly_connected(format!("f{}n{i}", fams.len()), n, d, &["1", "2"], rng.gen()).unwrap()
            })
            .collect();
        let fam = NetworkFamily::new(format!("random{}", fams.len()), nets).unwrap();
        count += fam.len();
        fams.push(fam);
    }
    fams
}

fn witness_bound() -> Outcome {
    let fams = random_families(100, 2);
    let mut solvable = 0;
    let mut worst = 0i64;
    for fam in &fams {
        for f in GlobalFunction::catalog() {
            let r = is_solvable(fam, &f).map_err(|e| e.to_string())?;
            if !r.solvable {
                continue;
            }
            for (m, net) in fam.members().iter().enumerate() {
                solvable += 1;
                let d = net.diameter().unwrap();
                let w = r.witness[m];
                worst = worst.max(w as i64 - d as i64);
                ensure(w <= d + 1, || format!("{} f={} witness {w} > diameter {d} + 1", net.name(), f.name()))?;
            }
        }
    }
    let nets: usize = fams.iter().map(NetworkFamily::len).sum();
    Ok(vec![format!(
        "{nets} networks in {} families, {solvable} solvable instances, max witness-diameter {worst}",
        fams.len()
    )])
}

fn transcript_equivalence() -> Outcome {
    let rounds = 4;
    let mut pairs_checked = 0usize;
    for spec in [FamilySpec::uni_rings(5, &["a", "b", "c"], &["1"]), FamilySpec::bi_rings(5, &["a", "b", "c"], &["1"])] {
        let fam = generate_family(&spec).unwrap();
        let b = Bisim::new(&fam);
        // Transcript prefixes interned to small integers per level.
        let mut ids: Vec<HashMap<(LocalInfo, Vec<Vec<ViewMsg>>), usize>> = vec![HashMap::new(); rounds + 1];
        let mut keys = Vec::new();
        for (m, net) in fam.members().iter().enumerate() {
            let run = run_protocol(&Topology::from_network(net), &full_information(rounds), Scheduler::sync(), 100)
                .map_err(|e| e.to_string())?;
            for a in 0..net.len() {
                let local = LocalInfo::of_agent(net, a);
                let t: Vec<Vec<ViewMsg>> = (1..=rounds).map(|r| transcript(&run, a, r).unwrap()).collect();
                let per_k: Vec<usize> = (0..=rounds)
                    .map(|k| {
                        let key = (local.clone(), t[..k].to_vec());
                        let next = ids[k].len();
                        *ids[k].entry(key).or_insert(next)
                    })
                    .collect();
                keys.push((PointedNetwork::new(m, net.id(a)), per_k));
            }
        }
        for (p, tp) in &keys {
            for (q, tq) in &keys {
                for k in 0..=rounds {
                    let bis = b.bisim_k(k, *p, *q);
                    ensure(bis == (tp[k] == tq[k]), || {
                        format!(
                            "{}:{} vs {}:{} at k={k}: bisim {bis}",
                            fam.get(p.network).name(),
                            p.agent,
                            fam.get(q.network).name(),
                            q.agent
                        )
                    })?;
                }
                pairs_checked += 1;
            }
        }
    }
    Ok(vec![format!("{pairs_checked} ordered pairs, k <= {rounds}")])
}

fn pg_gc_learns() -> Outcome {
    let mut cases: Vec<(NetworkFamily, GlobalFunction)> = Vec::new();
    for fam in random_families(40, 4) {
        for f in GlobalFunction::catalog() {
            cases.push((fam.clone(), f));
        }
    }
    for spec in [FamilySpec::uni_rings(4, &["a", "b"], &["1"]), FamilySpec::bi_rings(4, &["a", "b"], &["1", "2"])] {
        let fam = generate_family(&spec).unwrap();
        for f in GlobalFunction::catalog() {
            cases.push((fam.clone(), f));
        }
    }
    let (mut families, mut runs) = (0, 0);
    for (fam, f) in &cases {
        // Sums need integer inputs; letter-labeled rings skip them.
        let Ok(r) = is_solvable(fam, f) else { continue };
        if !r.solvable {
            continue;
        }
        families += 1;
        let q = pg_gc(fam, f).map_err(|e| e.to_string())?;
        for (m, net) in fam.members().iter().enumerate() {
            let truth = f.eval(net).unwrap();
            let topo = Topology::from_network(net);
            let sync = run_protocol(&topo, &q, Scheduler::sync(), 1_000).map_err(|e| e.to_string())?;
            for (a, l) in sync.learned.iter().enumerate() {
                let (round, v) = l.as_ref().ok_or_else(|| format!("{} agent {a} never learns {}", net.name(), f.name()))?;
                ensure(v == &truth, || format!("{} agent {a} learns {v}, not {truth}", net.name()))?;
                ensure(*round <= r.witness[m] + 1, || {
                    format!("{} agent {a} learns at {round} > {} + 1", net.name(), r.witness[m])
                })?;
            }
            for seed in 0..25 {
                let run = run_protocol(&topo, &q, Scheduler::fifo_async(seed), 1_000_000).map_err(|e| e.to_string())?;
                ensure(run.learned.iter().all(|l| l.as_ref().is_some_and(|(_, v)| v == &truth)), || {
                    format!("{} f={} seed {seed}: not every agent learns", net.name(), f.name())
                })?;
            }
            runs += 26;
        }
    }
    Ok(vec![format!("{families} solvable (family, function) cases, {runs} runs")])
}

fn de_facto<Q: Protocol>(q: Q, rings: &[Vec<u32>], bidirectional: bool) -> Result<DeFactoReport, String> {
    // One extra id and one extra size beyond the checked rings.
    let (worlds, family) = ring_universe(rings, 1, bidirectional);
    let mut sys = build_system(q, worlds, family, Policy::default()).map_err(|e| e.to_string())?;
    Ok(sys.de_facto_check())
}

fn lcr_prime_de_facto() -> Outcome {
    let rings = distinct_id_rings(5, 2..=5);
    let ok = de_facto(lcr_prime(), &rings, false)?;
    ensure(ok.ok(), || format!("lcr_prime: {}", ok.mismatches[0]))?;
    let bad = de_facto(lcr(), &rings, false)?;
    let hit = bad.networks();
    ensure(hit.len() == rings.len(), || format!("lcr mismatches on only {} of {} rings", hit.len(), rings.len()))?;
    Ok(vec![
        format!("lcr_prime: {} rings, OK states={}", rings.len(), ok.states),
        format!("lcr: mismatches on {} of {} rings, e.g. {}", hit.len(), rings.len(), bad.mismatches[0]),
    ])
}

fn p2_prime_de_facto() -> Outcome {
    let rings = distinct_id_rings(4, 2..=4);
    let rep = de_facto(p2_prime(), &rings, true)?;
    ensure(rep.ok(), || format!("{}", rep.mismatches[0]))?;
    Ok(vec![format!("{} rings, OK states={}", rings.len(), rep.states)])
}

fn run_ring<Q: Protocol>(ids: &[u32], bidirectional: bool, q: &Q, s: Scheduler) -> Result<Run<Q::Program>, String> {
    run_protocol(&ring_topology(ids, bidirectional), q, s, 1_000_000).map_err(|e| e.to_string())
}

fn lemma_check<Q: Protocol>(ids: &[u32], q: &Q) -> Result<Vec<LemmaViolation>, String>
where
    Q::Program: Halving,
{
    let sync = run_ring(ids, true, q, Scheduler::sync())?;
    let mut v = check_order_lemma(&sync);
    v.extend(check_interval_lemmas(&sync));
    v.extend(check_phase_lemma(&sync));
    for seed in 0..5 {
        let a = run_ring(ids, true, q, Scheduler::fifo_async(seed))?;
        v.extend(check_order_lemma(&a));
        v.extend(check_interval_lemmas(&a));
        v.extend(check_phase_lemma(&a));
        v.extend(schedule_independence(&sync, &a));
    }
    Ok(v)
}

fn structural_lemmas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..200 {
        let n = rng.gen_range(2..=8);
        let ids = shuffled_ids(n, rng.gen());
        let mut v = lemma_check(&ids, &p2())?;
        v.extend(lemma_check(&ids, &p2_prime())?);
        ensure(v.is_empty(), || format!("ring {i} {ids:?}: {}", v[0]))?;
    }
    Ok(vec!["200 rings, p2 and p2_prime, sync and 5 async seeds each".into()])
}

fn first_learner_lemma() -> Outcome {
    let rings = distinct_id_rings(6, 2..=6);
    let mut two = 0;
    for ids in &rings {
        let fl = first_learners(ids);
        ensure(!fl.agents.is_empty() && fl.agents.len() <= 2, || format!("{ids:?}: first learners {:?}", fl.agents))?;
        if fl.agents.len() == 2 {
            two += 1;
        }
        let max = *ids.iter().max().unwrap();
        // The halting variant stops right after learning, so the final
        // state is the status just after learning.
        let run = run_ring(ids, true, &gfc::election::P2Prime::halting(), Scheduler::sync())?;
        for &k in &fl.agents {
            if run.programs[k].is_active() {
                ensure(ids[k] == max, || format!("{ids:?}: active first learner {k} is not the max"))?;
            }
        }
    }
    let fl = first_learners(&[1, 2]);
    ensure(fl.agents == vec![0], || format!("[1,2] gives {:?}", fl.agents))?;
    Ok(vec![format!("{} rings, {two} with two first learners", rings.len())])
}

fn message_savings() -> Outcome {
    let mut details = Vec::new();
    for n in 3..=10 {
        let mut rings: Vec<Vec<u32>> = (0..10).map(|s| shuffled_ids(n, 100 * n as u64 + s)).collect();
        rings.push((1..=n as u32).collect());
        rings.push((1..=n as u32).rev().collect());
        let mut saved = Vec::new();
        for ids in &rings {
            let a = message_stats(&run_ring(ids, true, &p2(), Scheduler::sync())?).messages;
            let b = message_stats(&run_ring(ids, true, &p2_prime(), Scheduler::sync())?).messages;
            ensure(b < a, || format!("{ids:?}: p2_prime {b} >= p2 {a}"))?;
            saved.push(a - b);
            let l = message_stats(&run_ring(ids, false, &lcr(), Scheduler::sync())?).messages;
            let lp = message_stats(&run_ring(ids, false, &lcr_prime(), Scheduler::sync())?).messages;
            ensure(lp + 1 == l, || format!("{ids:?}: lcr {l}, lcr_prime {lp}"))?;
        }
        let mean = saved.iter().sum::<usize>() as f64 / saved.len() as f64;
        details.push(format!(
            "n={n:2} rings={} p2-p2_prime saved min={} mean={mean:.1} max={}",
            rings.len(),
            saved.iter().min().unwrap(),
            saved.iter().max().unwrap()
        ));
    }
    details.push("lcr - lcr_prime = 1 on every ring".into());
    Ok(details)
}

fn flooding_rounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut tested = 0;
    let mut by_d = [0usize; 4];
    while tested < 50 {
        let n = rng.gen_range(1..=7);
        let net = random_strongly_connected("r", n, rng.gen_range(0.2..0.9), &["1"], rng.gen()).unwrap();
        let diam = net.diameter().unwrap();
        if diam > 3 {
            continue;
        }
        // At least one round so that there is a round to learn in.
        let d = rng.gen_range(diam.max(1)..=3);
        let run = run_protocol(&Topology::from_network(&net), &flooding(d), Scheduler::sync(), 100)
            .map_err(|e| e.to_string())?;
        let max = n.to_string();
        for (a, l) in run.learned.iter().enumerate() {
            ensure(l.as_ref().is_some_and(|(r, v)| *r == d && v == &max), || {
                format!("{} (d={d}) agent {a}: {l:?}", net.to_text().replace('\n', "; "))
            })?;
        }
        by_d[d] += 1;
        tested += 1;
    }
    Ok(vec![format!("50 networks, d=1: {} d=2: {} d=3: {}", by_d[1], by_d[2], by_d[3])])
}

fn cli_determinism() -> Outcome {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let data = root.join("tests/data");
    let data_s = format!("{}/", data.display());
    let net = |f: &str| data.join(f).display().to_string();
    let cases: Vec<(&str, Vec<String>)> = vec![
        ("simulate_p2_prime_seed7.txt", vec![
            "simulate".into(), "--net".into(), net("ids5.net"), "--protocol".into(), "p2_prime".into(),
            "--async".into(), "--seed".into(), "7".into(),
        ]),
        ("simulate_ring3.txt", vec![
            "simulate".into(), "--net".into(), net("ring3.net"), "--protocol".into(), "pg_gc".into(),
            "--fn".into(), "multiset_inputs".into(), "--sync".into(),
        ]),
        ("bench.tsv", ["bench", "--min-n", "3", "--max-n", "6", "--seed", "1", "--format", "tsv", "--jobs", "2"]
            .map(String::from)
            .to_vec()),
        ("verify_lcr3.txt", ["verify", "--protocol", "lcr", "--max-n", "3"].map(String::from).to_vec()),
        ("check_random.txt", [
            "check", "--family", "random", "--max-n", "5", "--count", "6", "--family-seed", "9", "--fn", "max_input",
        ]
        .map(String::from)
        .to_vec()),
    ];
    for (golden, args) in &cases {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let out = Command::new(env!("CARGO_BIN_EXE_gfc")).args(args).output().map_err(|e| e.to_string())?;
            outputs.push(String::from_utf8(out.stdout).map_err(|e| e.to_string())?.replace(&data_s, "DATA/"));
        }
        ensure(outputs[0] == outputs[1], || format!("{golden}: two runs differ"))?;
        let expected = std::fs::read_to_string(root.join("tests/golden").join(golden)).map_err(|e| e.to_string())?;
        ensure(outputs[0] == expected, || format!("{golden}: output differs from the golden file"))?;
    }
    Ok(vec![format!("{} invocations run twice and matched against golden files", cases.len())])
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("doubled ring is indistinguishable and size unsolvable", doubled_ring),
        ("witness level at most diameter + 1", witness_bound),
        ("bisimilarity equals transcript equality", transcript_equivalence),
        ("pg_gc learns by witness + 1 and under async seeds", pg_gc_learns),
        ("lcr_prime de facto on uni-rings ids<=5; lcr mismatches", lcr_prime_de_facto),
        ("p2_prime de facto on bi-rings ids<=4", p2_prime_de_facto),
        ("structural lemmas of p2 and p2_prime", structural_lemmas),
        ("at most two first learners", first_learner_lemma),
        ("p2_prime cheaper than p2; lcr_prime = lcr - 1", message_savings),
        ("flooding learns the max after exactly d rounds", flooding_rounds),
        ("cli output is deterministic", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(details) => {
                println!("PASS {label} ({secs:.2}s)");
                for d in details {
                    println!("       {d}");
                }
            }
            Err(why) => {
                failed += 1;
                println!("FAIL {label} ({secs:.2}s)");
                println!("       {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
