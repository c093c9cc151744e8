use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::caps::{self, Caps};
use crate::error::{Error, Result};
use crate::model::DualInteractionGraph;

/// Upper limit on the number of clusters a single enumeration may return.
pub const CLUSTER_COUNT_CAP: usize = 2_000_000;

/// Multiset of Hamiltonian terms, stored as sorted `(term, multiplicity)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cluster {
    entries: Vec<(usize, u32)>,
}

impl Cluster {
    pub fn new(entries: impl IntoIterator<Item = (usize, u32)>) -> Result<Self> {
        let mut merged = std::collections::BTreeMap::<usize, u32>::new();
        for (a, mu) in entries {
            if mu == 0 {
                return Err(Error::InvalidModel(format!("term {a} has multiplicity 0 in cluster")));
            }
            *merged.entry(a).or_insert(0) += mu;
        }
        if merged.is_empty() {
            return Err(Error::InvalidModel("empty cluster".into()));
        }
        Ok(Cluster { entries: merged.into_iter().collect() })
    }

    pub fn single(a: usize) -> Self {
        Cluster { entries: vec![(a, 1)] }
    }

    /// Builds a cluster from a list of terms with repetition.
    pub fn from_terms(terms: &[usize]) -> Result<Self> {
        Cluster::new(terms.iter().map(|&a| (a, 1)))
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn weight(&self) -> usize {
        self.entries.iter().map(|&(_, m)| m as usize).sum()
    }

    /// `W! = Π μ(a)!`.
    pub fn factorial(&self) -> u64 {
        self.entries.iter().map(|&(_, m)| (1..=m as u64).product::<u64>()).product()
    }

    pub fn multiplicity(&self, a: usize) -> u32 {
        self.entries.iter().find(|e| e.0 == a).map_or(0, |e| e.1)
    }

    pub fn contains(&self, a: usize) -> bool {
        self.multiplicity(a) > 0
    }

    pub fn terms(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Terms with repetition, one per node of the interaction graph.
    pub fn nodes(&self) -> Vec<usize> {
        self.entries.iter().flat_map(|&(a, m)| std::iter::repeat(a).take(m as usize)).collect()
    }

    pub fn union(&self, other: &Cluster) -> Cluster {
        Cluster::new(self.entries.iter().chain(&other.entries).copied()).expect("nonempty union")
    }

    /// Maximal connected sub-clusters.
    pub fn components(&self, g: &DualInteractionGraph) -> Vec<Cluster> {
        let terms: Vec<usize> = self.terms().collect();
        let mut seen = vec![false; terms.len()];
        let mut out = Vec::new();
        for start in 0..terms.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(i) = stack.pop() {
                comp.push(self.entries[i]);
                for j in 0..terms.len() {
                    if !seen[j] && g.has_edge(terms[i], terms[j]) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            out.push(Cluster::new(comp).expect("nonempty component"));
        }
        out.sort();
        out
    }

    pub fn is_connected(&self, g: &DualInteractionGraph) -> bool {
        self.components(g).len() == 1
    }
}

impl fmt::Display for Cluster {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (a, m)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if *m == 1 {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}^{m}")?;
            }
        }
        write!(f, "}}")
    }
}

impl Serialize for Cluster {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Cluster", 3)?;
        st.serialize_field("terms", &self.terms().collect::<Vec<_>>())?;
        st.serialize_field("multiplicities", &self.entries.iter().map(|e| e.1).collect::<Vec<_>>())?;
        st.serialize_field("weight", &self.weight())?;
        st.end()
    }
}

/// Connected term sets of size at most `max_size`, each sorted.
fn connected_term_sets(g: &DualInteractionGraph, max_size: usize) -> Result<Vec<Vec<usize>>> {
    let mut all: Vec<Vec<usize>> = Vec::new();
    let mut layer: BTreeSet<Vec<usize>> = (0..g.n_nodes()).map(|a| vec![a]).collect();
    for size in 1..=max_size {
        if layer.is_empty() {
            break;
        }
        all.extend(layer.iter().cloned());
        caps::check("connected clusters", all.len(), CLUSTER_COUNT_CAP)?;
        if size == max_size {
            break;
        }
        let mut next = BTreeSet::new();
        for set in &layer {
            for &a in set {
                for &b in g.neighbors(a) {
                    if let Err(pos) = set.binary_search(&b) {
                        let mut grown = set.clone();
                        grown.insert(pos, b);
                        next.insert(grown);
                    }
                }
            }
        }
        layer = next;
    }
    Ok(all)
}

/// Multiplicity vectors `μ ≥ 1` over `k` slots with total at most `max_total`.
fn multiplicity_assignments(k: usize, max_total: usize) -> Vec<Vec<u32>> {
    fn rec(k: usize, budget: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        let remaining_slots = k - cur.len() - 1;
        for mu in 1..=budget.saturating_sub(remaining_slots) {
            cur.push(mu as u32);
            rec(k, budget - mu, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= max_total {
        rec(k, max_total, &mut Vec::new(), &mut out);
    }
    out
}

/// All connected clusters of weight `1..=max_weight`, optionally restricted
/// to those containing one of the `anchor` terms. Sorted by weight, then terms.
pub fn enumerate_connected_clusters(
    g: &DualInteractionGraph,
    max_weight: usize,
    anchor: Option<&[usize]>,
) -> Result<Vec<Cluster>> {
    caps::check("cluster weight", max_weight, Caps::get().cluster_weight)?;
    let mut out = Vec::new();
    for set in connected_term_sets(g, max_weight)? {
        if let Some(anchor) = anchor {
            if !set.iter().any(|a| anchor.contains(a)) {
                continue;
            }
        }
        for mus in multiplicity_assignments(set.len(), max_weight) {
            out.push(Cluster { entries: set.iter().copied().zip(mus).collect() });
            caps::check("connected clusters", out.len(), CLUSTER_COUNT_CAP)?;
        }
    }
    out.sort_by(|a, b| a.weight().cmp(&b.weight()).then_with(|| a.cmp(b)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_dual_graph, zoo, LocalHamiltonian, SiteGraph, TermSpec};

    fn path_dual(n_terms: usize) -> DualInteractionGraph {
        build_dual_graph(&zoo::ising_chain(n_terms + 1, 1.0).unwrap())
    }

    #[test]
    fn single_term_powers() {
        let h = LocalHamiltonian::new(SiteGraph::new(1, 2).unwrap(), vec![TermSpec::pauli("Z", 1.0).unwrap()]).unwrap();
        let got = enumerate_connected_clusters(&build_dual_graph(&h), 3, None).unwrap();
        let want: Vec<Cluster> = (1..=3).map(|m| Cluster::new([(0, m)]).unwrap()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn three_term_path_weight_two() {
        let g = path_dual(3);
        let got: Vec<Cluster> = enumerate_connected_clusters(&g, 2, None).unwrap().into_iter().filter(|c| c.weight() == 2).collect();
        let want = vec![
            Cluster::new([(0, 1), (1, 1)]).unwrap(),
            Cluster::new([(0, 2)]).unwrap(),
            Cluster::new([(1, 1), (2, 1)]).unwrap(),
            Cluster::new([(1, 2)]).unwrap(),
            Cluster::new([(2, 2)]).unwrap(),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn matches_brute_force_on_lattice() {
        let h = zoo::ising_lattice(2, 3, 1.0).unwrap();
        let g = build_dual_graph(&h);
        let w = 4;
        let got: BTreeSet<Cluster> = enumerate_connected_clusters(&g, w, None).unwrap().into_iter().collect();
        // every multiset of weight ≤ w, filtered by connectivity
        let t = g.n_nodes();
        let mut want = BTreeSet::new();
        fn rec(t: usize, start: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
            if !cur.is_empty() {
                f(cur);
            }
            if left == 0 {
                return;
            }
            for a in start..t {
                cur.push(a);
                rec(t, a, left - 1, cur, f);
                cur.pop();
            }
        }
        rec(t, 0, w, &mut Vec::new(), &mut |terms| {
            let c = Cluster::from_terms(terms).unwrap();
            if c.is_connected(&g) {
                want.insert(c);
            }
        });
        assert_eq!(got, want);
    }

    #[test]
    fn anchor_filter_and_components() {
        let g = path_dual(4);
        let anchored = enumerate_connected_clusters(&g, 3, Some(&[0])).unwrap();
        assert!(anchored.iter().all(|c| c.contains(0)));
        let c = Cluster::new([(0, 2), (2, 1), (3, 1)]).unwrap();
        assert_eq!(c.components(&g), vec![Cluster::new([(0, 2)]).unwrap(), Cluster::new([(2, 1), (3, 1)]).unwrap()]);
        assert_eq!(c.factorial(), 2);
        assert_eq!(c.weight(), 4);
        assert_eq!(c.to_string(), "{0^2,2,3}");
    }

    #[test]
    fn zero_multiplicity_rejected() {
        assert!(Cluster::new([(0, 0)]).is_err());
        assert!(Cluster::new(Vec::new()).is_err());
    }
}
