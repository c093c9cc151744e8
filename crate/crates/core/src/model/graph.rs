use std::collections::VecDeque;
use std::fmt;

use serde::{Serialize, Serializer};

use super::hamiltonian::LocalHamiltonian;
use crate::error::{Error, Result};

/// Tripartition `A | B | C` of (a subset of) the sites. Sites outside the
/// union are traced out by every CMI evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    a: Vec<usize>,
    b: Vec<usize>,
    c: Vec<usize>,
}

fn normalized(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

impl Partition {
    pub fn new(a: Vec<usize>, b: Vec<usize>, c: Vec<usize>, n_sites: usize) -> Result<Self> {
        let (a, b, c) = (normalized(a), normalized(b), normalized(c));
        if a.is_empty() || c.is_empty() {
            return Err(Error::InvalidPartition("A and C must be nonempty".into()));
        }
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return Err(Error::InvalidPartition("A, B, C must be pairwise disjoint".into()));
        }
        if let Some(s) = all.iter().find(|&&s| s >= n_sites) {
            return Err(Error::InvalidPartition(format!("site {s} outside 0..{n_sites}")));
        }
        Ok(Partition { a, b, c })
    }

    /// `A = first wa sites`, `C = last wa sites`, `B` = everything between.
    pub fn chain_ends(n_sites: usize, wa: usize) -> Result<Self> {
        if 2 * wa > n_sites {
            return Err(Error::InvalidPartition(format!(
                "cannot place two end blocks of {wa} sites in a chain of {n_sites}"
            )));
        }
        Partition::new(
            (0..wa).collect(),
            (wa..n_sites - wa).collect(),
            (n_sites - wa..n_sites).collect(),
            n_sites,
        )
    }

    pub fn a(&self) -> &[usize] {
        &self.a
    }
    pub fn b(&self) -> &[usize] {
        &self.b
    }
    pub fn c(&self) -> &[usize] {
        &self.c
    }
    pub fn ab(&self) -> Vec<usize> {
        normalized(self.a.iter().chain(&self.b).copied().collect())
    }
    pub fn bc(&self) -> Vec<usize> {
        normalized(self.b.iter().chain(&self.c).copied().collect())
    }
    pub fn abc(&self) -> Vec<usize> {
        normalized(self.a.iter().chain(&self.b).chain(&self.c).copied().collect())
    }

    /// The four regions `(AB, BC, B, ABC)` entering `S(AB)+S(BC)-S(B)-S(ABC)`.
    pub fn regions(&self) -> [Vec<usize>; 4] {
        [self.ab(), self.bc(), self.b.clone(), self.abc()]
    }
}

/// Graph whose nodes are terms and whose edges join terms with overlapping support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualInteractionGraph {
    adjacency: Vec<Vec<usize>>,
    degree: usize,
}

impl DualInteractionGraph {
    pub fn n_nodes(&self) -> usize {
        self.adjacency.len()
    }
    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.adjacency[a]
    }
    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }
    /// Maximal number of terms supported on any single site.
    pub fn degree(&self) -> usize {
        self.degree
    }
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
            .collect()
    }
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }
}

pub fn build_dual_graph(h: &LocalHamiltonian) -> DualInteractionGraph {
    let n = h.n_sites();
    let mut on_site: Vec<Vec<usize>> = vec![Vec::new(); n];
    for t in h.terms() {
        for &s in &t.support {
            on_site[s].push(t.index);
        }
    }
    let degree = on_site.iter().map(Vec::len).max().unwrap_or(0);
    let mut adjacency = vec![Vec::new(); h.terms().len()];
    for terms in &on_site {
        for &a in terms {
            for &b in terms {
                if a != b {
                    adjacency[a].push(b);
                }
            }
        }
    }
    for nb in &mut adjacency {
        nb.sort_unstable();
        nb.dedup();
    }
    DualInteractionGraph { adjacency, degree }
}

/// Number of terms in the smallest connected term set touching both regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Distance {
    Finite(usize),
    Infinite,
}

impl Distance {
    pub fn finite(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            Distance::Infinite => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(d) => s.serialize_u64(*d as u64),
            Distance::Infinite => s.serialize_str("inf"),
        }
    }
}

pub fn terms_touching(h: &LocalHamiltonian, sites: &[usize]) -> Vec<usize> {
    h.terms()
        .iter()
        .filter(|t| t.support.iter().any(|s| sites.contains(s)))
        .map(|t| t.index)
        .collect()
}

/// `d_AC`: breadth-first search on the dual graph from the terms touching A,
/// counting nodes, until a term touching C is reached.
pub fn graph_distance(h: &LocalHamiltonian, p: &Partition) -> Distance {
    distance_between(h, &build_dual_graph(h), p.a(), p.c())
}

pub fn distance_between(
    h: &LocalHamiltonian,
    dual: &DualInteractionGraph,
    a: &[usize],
    c: &[usize],
) -> Distance {
    let sources = terms_touching(h, a);
    let targets = terms_touching(h, c);
    let mut is_target = vec![false; dual.n_nodes()];
    for &t in &targets {
        is_target[t] = true;
    }
    let mut dist = vec![usize::MAX; dual.n_nodes()];
    let mut queue = VecDeque::new();
    for &s in &sources {
        dist[s] = 1;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        if is_target[u] {
            return Distance::Finite(dist[u]);
        }
        for &v in dual.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    Distance::Infinite
}
