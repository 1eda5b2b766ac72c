//! Worlds made of rings with distinct integer ids.

use crate::election::{ring_name, ring_topology};
use crate::network::{GlobalFunction, Network};

use super::World;

/// Every ring with distinct ids from `1..=max_id` and a size in `sizes`,
/// once per rotation: the smallest id comes first. Reflections are kept,
/// since agents tell left from right.
pub fn distinct_id_rings(max_id: u32, sizes: impl IntoIterator<Item = usize>) -> Vec<Vec<u32>> {
    fn extend(cur: &mut Vec<u32>, n: usize, max_id: u32, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in cur[0] + 1..=max_id {
            if !cur.contains(&v) {
                cur.push(v);
                extend(cur, n, max_id, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    for n in sizes {
        if n < 2 {
            continue;
        }
        for first in 1..=max_id {
            extend(&mut vec![first], n, max_id, &mut out);
        }
    }
    out
}

/// Worlds for rings, with the largest id as the function.
pub fn ring_worlds(rings: &[Vec<u32>], bidirectional: bool) -> Vec<World> {
    rings.iter().map(|ids| ring_world(ids, ring_name(ids, bidirectional), bidirectional)).collect()
}

fn ring_world(ids: &[u32], name: String, bidirectional: bool) -> World {
    let f = GlobalFunction::max_input();
    let inputs: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
    let network = if bidirectional {
        Network::bi_ring(name.clone(), &inputs, "1")
    } else {
        Network::uni_ring(name.clone(), &inputs, "1")
    }
    .expect("rings of two or more agents are valid networks");
    let mut topology = ring_topology(ids, bidirectional);
    topology.rename(name);
    World::new(network, topology, &f).expect("max is defined on every ring")
}

/// The rings to check followed by every other ring whose ids reach up to
/// `horizon` beyond the ids used, on both sides, and whose size is up to
/// `horizon` above the largest size. The extra rings keep agents from
/// ruling worlds out just because the checked set happens to end where it
/// does: without room below, the agent with id 1 would know it cannot be
/// the largest.
///
/// The protocols only compare ids, so the system shifts every id up by
/// `horizon` to keep them positive; names keep the labels as given.
pub fn ring_universe(rings: &[Vec<u32>], horizon: usize, bidirectional: bool) -> (Vec<World>, usize) {
    let h = horizon as u32;
    let lo = rings.iter().flatten().copied().min().unwrap_or(1);
    let hi = rings.iter().flatten().copied().max().unwrap_or(1);
    let max_n = rings.iter().map(Vec::len).max().unwrap_or(2) + horizon;
    // Shifted so that the smallest id in use becomes `h + 1`.
    let shift = |v: u32| v + h + 1 - lo;
    let label = |ids: &[u32]| -> String {
        let body: Vec<String> = ids.iter().map(|&v| (v as i64 - (h + 1) as i64 + lo as i64).to_string()).collect();
        format!("{}[{}]", if bidirectional { "bi" } else { "uni" }, body.join(","))
    };
    let mut worlds = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for r in rings {
        let ids: Vec<u32> = canonical(r).into_iter().map(shift).collect();
        seen.insert(ids.clone());
        worlds.push(ring_world(&ids, ring_name(r, bidirectional), bidirectional));
    }
    for ids in distinct_id_rings(shift(hi) + h, 2..=max_n) {
        if seen.insert(ids.clone()) {
            let name = label(&ids);
            worlds.push(ring_world(&ids, name, bidirectional));
        }
    }
    (worlds, rings.len())
}
/// The rotation that starts at the smallest id.
fn canonical(ids: &[u32]) -> Vec<u32> {
    let k = (0..ids.len()).min_by_key(|&k| ids[k]).unwrap_or(0);
    ids[k..].iter().chain(&ids[..k]).copied().collect()
}
