//! When can every agent learn `f`?
//!
//! Over a finite family the answer is read off the stable bisimilarity
//! partition: `f` is computable iff no stable block mixes networks with
//! different values of `f`. The level at which a network's blocks first
//! become `f`-constant is how many rounds of full information its agents
//! need.

use std::fmt;

use thiserror::Error;

use crate::bisim::{PointedNetwork, Bisim, BisimPartition, bisim_partition};
use crate::network::{FunctionError, GlobalFunction, NetworkFamily, Value};

/// Two agents no amount of communication tells apart whose networks
/// disagree on `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub k_star: usize,
    pub p: PointedNetwork,
    pub q: PointedNetwork,
    pub fp: Value,
    pub fq: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolvabilityReport {
    pub function: String,
    pub solvable: bool,
    pub k_star: usize,
    /// Per member, the least level at which all its agents' blocks are
    /// `f`-constant. Empty when not solvable.
    pub witness: Vec<usize>,
    pub counterexample: Option<Counterexample>,
    pub names: Vec<String>,
}

impl SolvabilityReport {
    pub fn witness_k(&self, member: usize) -> Option<usize> {
        self.witness.get(member).copied()
    }

    pub fn max_witness(&self) -> Option<usize> {
        self.witness.iter().copied().max()
    }
}

impl fmt::Display for SolvabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "function {}", self.function)?;
        writeln!(f, "k_star {}", self.k_star)?;
        if self.solvable {
            writeln!(f, "solvable yes")?;
            for (name, k) in self.names.iter().zip(&self.witness) {
                writeln!(f, "witness {name} k={k}")?;
            }
        } else {
            writeln!(f, "solvable no")?;
            if let Some(c) = &self.counterexample {
                writeln!(
                    f,
                    "counterexample {}:{} f={} ~ {}:{} f={}",
                    self.names[c.p.network], c.p.agent, c.fp, self.names[c.q.network], c.q.agent, c.fq
                )?;
            }
        }
        Ok(())
    }
}

fn values(family: &NetworkFamily, f: &GlobalFunction) -> Result<Vec<Value>, FunctionError> {
    family.members().iter().map(|n| f.eval(n)).collect()
}

/// First pair in a block whose networks disagree on `f`.
fn conflict(part: &BisimPartition, fvals: &[Value]) -> Option<(PointedNetwork, PointedNetwork)> {
    for block in &part.blocks {
        let first = block[0];
        if let Some(&q) = block.iter().find(|q| fvals[q.network] != fvals[first.network]) {
            return Some((first, q));
        }
    }
    None
}

pub fn is_solvable(family: &NetworkFamily, f: &GlobalFunction) -> Result<SolvabilityReport, FunctionError> {
    let fvals = values(family, f)?;
    let k_star = Bisim::new(family).k_star();
    let names = family.members().iter().map(|n| n.name().to_string()).collect();
    let stable = bisim_partition(family, k_star);
    if let Some((p, q)) = conflict(&stable, &fvals) {
        let (fp, fq) = (fvals[p.network].clone(), fvals[q.network].clone());
        return Ok(SolvabilityReport {
            function: f.name().to_string(),
            solvable: false,
            k_star,
            witness: Vec::new(),
            counterexample: Some(Counterexample { k_star, p, q, fp, fq }),
            names,
        });
    }
    let mut witness = vec![None; family.len()];
    for k in 0..=k_star {
        let part = bisim_partition(family, k);
        let mut bad = vec![false; family.len()];
        for block in &part.blocks {
            let mixed = block.iter().any(|q| fvals[q.network] != fvals[block[0].network]);
            if mixed {
                for q in block {
                    bad[q.network] = true;
                }
            }
        }
        for (m, w) in witness.iter_mut().enumerate() {
            if w.is_none() && !bad[m] {
                *w = Some(k);
            }
        }
    }
    Ok(SolvabilityReport {
        function: f.name().to_string(),
        solvable: true,
        k_star,
        witness: witness.into_iter().map(|w| w.expect("stable blocks are f-constant")).collect(),
        counterexample: None,
        names,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundError {
    #[error("{network} is not strongly connected")]
    NotStronglyConnected { network: String },
    #[error("agents {i} and {j} of {network} are locally the same")]
    LocallySame { network: String, i: u32, j: u32 },
    #[error(transparent)]
    Function(#[from] FunctionError),
}

/// Checks that every member needs at most `diameter + 1` rounds. Members
/// must be strongly connected with no two agents locally the same.
pub fn check_diameter_bound(family: &NetworkFamily, f: &GlobalFunction) -> Result<bool, BoundError> {
    let mut diameters = Vec::with_capacity(family.len());
    for net in family.members() {
        let d = net
            .diameter()
            .map_err(|_| BoundError::NotStronglyConnected { network: net.name().to_string() })?;
        for a in 0..net.len() {
            for b in a + 1..net.len() {
                if net.locally_same_ix(a, b) {
                    return Err(BoundError::LocallySame {
                        network: net.name().to_string(),
                        i: net.id(a),
                        j: net.id(b),
                    });
                }
            }
        }
        diameters.push(d);
    }
    let report = is_solvable(family, f)?;
    if !report.solvable {
        return Ok(false);
    }
    Ok(report.witness.iter().zip(&diameters).all(|(&k, &d)| k <= d + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Network;

    #[test]
    fn singleton_needs_no_rounds() {
        let n = Network::uni_ring("r", &["a", "a", "b"], "1").unwrap();
        let fam = NetworkFamily::new("one", vec![n]).unwrap();
        let r = is_solvable(&fam, &GlobalFunction::size()).unwrap();
        assert!(r.solvable);
        assert_eq!(r.witness, vec![0]);
    }

    #[test]
    fn doubled_ring_blocks_size() {
        let small = Network::uni_ring("tri", &["a", "b", "c"], "w").unwrap();
        let big = Network::uni_ring("hex", &["a", "b", "c", "a", "b", "c"], "w").unwrap();
        let fam = NetworkFamily::new("pair", vec![small, big]).unwrap();
        let r = is_solvable(&fam, &GlobalFunction::size()).unwrap();
        assert!(!r.solvable);
        let c = r.counterexample.unwrap();
        assert_eq!((c.fp.as_str(), c.fq.as_str()), ("3", "6"));
        // The multiset of inputs differs too, but the input set does not.
        let set = GlobalFunction::custom("input_set", |n| {
            let mut xs: Vec<_> = n.agents().iter().map(|a| a.input.clone()).collect();
            xs.sort();
            xs.dedup();
            Ok(xs.join(","))
        });
        assert!(is_solvable(&fam, &set).unwrap().solvable);
    }

    #[test]
    fn symmetric_member_violates_precondition() {
        let n = Network::uni_ring("s", &["x", "x"], "1").unwrap();
        let fam = NetworkFamily::new("one", vec![n]).unwrap();
        assert!(matches!(
            check_diameter_bound(&fam, &GlobalFunction::size()),
            Err(BoundError::LocallySame { .. })
        ));
    }
}
