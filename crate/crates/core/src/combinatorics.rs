//! Graph colorings, connected partitions and spanning trees on small graphs.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::caps::{self, Caps};
use crate::cluster::Cluster;
use crate::error::{Error, Result};
use crate::model::DualInteractionGraph;

const MAX_NODES: usize = 32;

/// Undirected simple graph on at most 32 nodes, stored as adjacency bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SimpleGraph {
    adj: Vec<u32>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n > MAX_NODES {
            return Err(Error::CapExceeded { what: "graph nodes", value: n, cap: MAX_NODES });
        }
        let mut adj = vec![0u32; n];
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidModel(format!("bad edge ({u}, {v}) on {n} nodes")));
            }
            if adj[u] >> v & 1 == 1 {
                return Err(Error::InvalidModel(format!("duplicate edge ({u}, {v})")));
            }
            adj[u] |= 1 << v;
            adj[v] |= 1 << u;
        }
        Ok(SimpleGraph { adj })
    }

    pub fn empty(n: usize) -> Self {
        SimpleGraph { adj: vec![0; n] }
    }

    pub fn complete(n: usize) -> Self {
        let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        SimpleGraph { adj: (0..n).map(|v| all & !(1 << v)).collect() }
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        SimpleGraph::new(n, &edges).expect("valid path")
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u] >> v & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(|a| a.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_nodes())
            .flat_map(|u| (u + 1..self.n_nodes()).filter(move |&v| self.has_edge(u, v)).map(move |v| (u, v)))
            .collect()
    }

    fn full_mask(&self) -> u32 {
        if self.adj.len() == 32 { u32::MAX } else { (1u32 << self.adj.len()) - 1 }
    }

    /// True iff the subgraph induced by `mask` is nonempty and connected.
    pub fn induces_connected(&self, mask: u32) -> bool {
        if mask == 0 {
            return false;
        }
        let mut reached = 1u32 << mask.trailing_zeros();
        loop {
            let mut grow = reached;
            let mut bits = reached;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                grow |= self.adj[v] & mask;
                bits &= bits - 1;
            }
            if grow == reached {
                return reached == mask;
            }
            reached = grow;
        }
    }

    pub fn is_connected(&self) -> bool {
        self.n_nodes() <= 1 || self.induces_connected(self.full_mask())
    }
}

/// One node per element `(a, i)` of the multiset; nodes are adjacent when
/// their terms overlap, which includes two copies of the same term.
pub fn interaction_graph_of_cluster(w: &Cluster, g: &DualInteractionGraph) -> Result<SimpleGraph> {
    let nodes = w.nodes();
    let mut edges = Vec::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            if nodes[i] == nodes[j] || g.has_edge(nodes[i], nodes[j]) {
                edges.push((i, j));
            }
        }
    }
    SimpleGraph::new(nodes.len(), &edges)
}

/// Partition of the node set into blocks that each induce a connected subgraph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ConnectedPartition {
    blocks: Vec<Vec<usize>>,
}

impl ConnectedPartition {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }
    pub fn len(&self) -> usize {
        self.blocks.len()
    }
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
    fn masks(&self) -> Vec<u32> {
        self.blocks.iter().map(|b| b.iter().fold(0, |m, &v| m | (1 << v))).collect()
    }
}

fn mask_to_vec(mut m: u32) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        out.push(m.trailing_zeros() as usize);
        m &= m - 1;
    }
    out
}

/// Every partition of the nodes into connected induced subgraphs.
/// Blocks are listed by smallest node.
pub fn enumerate_connected_partitions(g: &SimpleGraph) -> Result<Vec<ConnectedPartition>> {
    caps::check("partition nodes", g.n_nodes(), Caps::get().partition_nodes)?;
    fn rec(g: &SimpleGraph, rest: u32, cur: &mut Vec<u32>, out: &mut Vec<ConnectedPartition>) {
        if rest == 0 {
            out.push(ConnectedPartition { blocks: cur.iter().map(|&m| mask_to_vec(m)).collect() });
            return;
        }
        let low = rest & rest.wrapping_neg();
        let others = rest & !low;
        // submasks of `others`, each joined with the lowest remaining node
        let mut sub = others;
        loop {
            let block = sub | low;
            if g.induces_connected(block) {
                cur.push(block);
                rec(g, rest & !block, cur, out);
                cur.pop();
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & others;
        }
    }
    let mut out = Vec::new();
    if g.n_nodes() > 0 {
        rec(g, g.full_mask(), &mut Vec::new(), &mut out);
    }
    out.sort();
    Ok(out)
}

/// Blocks become nodes; two blocks are adjacent when an edge joins them.
pub fn quotient_graph(g: &SimpleGraph, p: &ConnectedPartition) -> SimpleGraph {
    let masks = p.masks();
    let neighborhoods: Vec<u32> = masks
        .iter()
        .map(|&m| mask_to_vec(m).into_iter().fold(0, |acc, v| acc | g.adj[v]))
        .collect();
    let k = masks.len();
    let mut adj = vec![0u32; k];
    for i in 0..k {
        for j in 0..k {
            if i != j && neighborhoods[i] & masks[j] != 0 {
                adj[i] |= 1 << j;
            }
        }
    }
    SimpleGraph { adj }
}

/// Polynomial with big-integer coefficients, lowest power first.
pub type IntPoly = Vec<BigInt>;

/// Memo table for chromatic polynomials keyed on exact adjacency.
#[derive(Debug, Default)]
pub struct ChromaticCache {
    memo: HashMap<Vec<u32>, IntPoly>,
}

fn remove_node(adj: &[u32], v: usize) -> Vec<u32> {
    let low = (1u32 << v) - 1;
    adj.iter()
        .enumerate()
        .filter(|&(i, _)| i != v)
        .map(|(_, &m)| (m & low) | ((m >> (v + 1)) << v))
        .collect()
}

fn falling_factorial(n: usize) -> IntPoly {
    let mut p: IntPoly = vec![BigInt::one()];
    for k in 0..n {
        // multiply by (x - k)
        let mut next = vec![BigInt::zero(); p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= c * BigInt::from(k);
        }
        p = next;
    }
    p
}

impl ChromaticCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn chromatic_polynomial(&mut self, g: &SimpleGraph) -> IntPoly {
        self.poly(&g.adj)
    }

    fn poly(&mut self, adj: &[u32]) -> IntPoly {
        let n = adj.len();
        let edges: usize = adj.iter().map(|a| a.count_ones() as usize).sum::<usize>() / 2;
        if edges == 0 {
            let mut p = vec![BigInt::zero(); n + 1];
            p[n] = BigInt::one();
            return p;
        }
        if edges == n * (n - 1) / 2 {
            return falling_factorial(n);
        }
        if let Some(p) = self.memo.get(adj) {
            return p.clone();
        }
        let u = (0..n).max_by_key(|&v| adj[v].count_ones()).expect("nonempty");
        let v = adj[u].trailing_zeros() as usize;
        let mut deleted = adj.to_vec();
        deleted[u] &= !(1 << v);
        deleted[v] &= !(1 << u);
        let mut merged = deleted.clone();
        let nv = merged[v];
        merged[u] |= nv;
        for w in mask_to_vec(nv) {
            merged[w] |= 1 << u;
        }
        let contracted = remove_node(&merged, v);
        let mut p = self.poly(&deleted);
        let q = self.poly(&contracted);
        for (i, c) in q.into_iter().enumerate() {
            p[i] -= c;
        }
        self.memo.insert(adj.to_vec(), p.clone());
        p
    }

    /// Proper colorings using all of exactly `n` colors.
    pub fn chi_star(&mut self, n: usize, g: &SimpleGraph) -> BigInt {
        let p = self.chromatic_polynomial(g);
        let mut total = BigInt::zero();
        let mut binom = BigInt::one();
        for j in 0..=n {
            let term = &binom * eval_poly(&p, j);
            if (n - j) % 2 == 0 {
                total += term;
            } else {
                total -= term;
            }
            binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
        }
        total
    }

    /// `Σ_{n=1}^{|V|} (−1)^{n−1}/n χ*(n, g)`, the coefficient of one partition
    /// in the reassembly of a log-derivative from connected derivatives.
    pub fn log_coefficient(&mut self, g: &SimpleGraph) -> BigRational {
        let mut sum = BigRational::zero();
        for n in 1..=g.n_nodes() {
            let term = BigRational::new(self.chi_star(n, g), BigInt::from(n));
            if n % 2 == 1 {
                sum += term;
            } else {
                sum -= term;
            }
        }
        sum
    }
}

pub fn eval_poly(p: &IntPoly, k: usize) -> BigInt {
    let x = BigInt::from(k);
    p.iter().rev().fold(BigInt::zero(), |acc, c| acc * &x + c)
}

pub fn chromatic_polynomial(g: &SimpleGraph) -> IntPoly {
    ChromaticCache::new().chromatic_polynomial(g)
}

pub fn chi_star(n: usize, g: &SimpleGraph) -> BigInt {
    ChromaticCache::new().chi_star(n, g)
}

/// Matrix-Tree count via a fraction-free determinant of the reduced Laplacian.
pub fn spanning_tree_count(g: &SimpleGraph) -> BigInt {
    let n = g.n_nodes();
    if n == 0 {
        return BigInt::zero();
    }
    let k = n - 1;
    let mut m: Vec<Vec<BigInt>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        BigInt::from(g.degree(i))
                    } else if g.has_edge(i, j) {
                        -BigInt::one()
                    } else {
                        BigInt::zero()
                    }
                })
                .collect()
        })
        .collect();
    bareiss_determinant(&mut m)
}

fn bareiss_determinant(m: &mut [Vec<BigInt>]) -> BigInt {
    let k = m.len();
    if k == 0 {
        return BigInt::one();
    }
    let mut sign = 1;
    let mut prev = BigInt::one();
    for p in 0..k {
        if m[p][p].is_zero() {
            match (p + 1..k).find(|&r| !m[r][p].is_zero()) {
                Some(r) => {
                    m.swap(p, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in p + 1..k {
            for j in p + 1..k {
                let v = (&m[i][j] * &m[p][p] - &m[i][p] * &m[p][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[p][p].clone();
    }
    let det = m[k - 1][k - 1].clone();
    if sign < 0 { -det } else { det }
}

/// Rational lower bound on e from its truncated series.
pub fn e_lower_bound() -> BigRational {
    let mut term = BigRational::one();
    let mut sum = BigRational::one();
    for k in 1..=25u32 {
        term /= BigRational::from_integer(BigInt::from(k));
        sum += &term;
    }
    sum
}

fn rational_pow(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

/// `e𝔡(1 + e(𝔡−1))^{w−1}`, evaluated with the lower bound on e.
pub fn cluster_count_bound(degree: usize, weight: usize) -> BigRational {
    let e = e_lower_bound();
    let d = BigRational::from_integer(BigInt::from(degree));
    let base = BigRational::one() + &e * (&d - BigRational::one());
    &e * &d * rational_pow(&base, weight.saturating_sub(1))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact values on both sides of the coloring estimate for one cluster.
#[derive(Debug, Clone, Serialize)]
pub struct CombinatorialEstimate {
    pub cluster: Cluster,
    pub graph_nodes: usize,
    pub partitions: usize,
    /// `Σ_B |Σ_n (−1)^n/n χ*(n, Gra(B))|` as an exact fraction.
    pub partition_sum: String,
    pub partition_sum_value: f64,
    pub spanning_trees: String,
    /// `2^{|W|−1} τ(Gra(W))`.
    pub tree_bound: f64,
    /// `2^{|W|−1} Π_{v≠root} deg(v)` with the root at a maximum-degree node.
    pub degree_bound: f64,
    /// `W! (2e(1+𝔡))^{|W|+1}`.
    pub factorial_bound: f64,
    pub pass: bool,
}

pub fn verify_combinatorial_estimate(
    w: &Cluster,
    g: &DualInteractionGraph,
    cache: &mut ChromaticCache,
) -> Result<CombinatorialEstimate> {
    caps::check("certificate weight", w.weight(), Caps::get().certificate_weight)?;
    let gra = interaction_graph_of_cluster(w, g)?;
    let partitions = enumerate_connected_partitions(&gra)?;
    let mut left = BigRational::zero();
    for p in &partitions {
        left += cache.log_coefficient(&quotient_graph(&gra, p)).abs();
    }
    let n = gra.n_nodes();
    let two_pow = BigInt::one() << (n - 1);
    let tau = spanning_tree_count(&gra);
    let tree_bound = &two_pow * &tau;
    let root = (0..n).max_by_key(|&v| gra.degree(v)).expect("nonempty cluster");
    let degree_product: BigInt = (0..n).filter(|&v| v != root).map(|v| BigInt::from(gra.degree(v))).product();
    let degree_bound = &two_pow * degree_product;
    let e = e_lower_bound();
    let base = BigRational::from_integer(BigInt::from(2 * (1 + g.degree()))) * e;
    let factorial_bound = BigRational::from_integer(BigInt::from(w.factorial())) * rational_pow(&base, n + 1);
    let tree_r = BigRational::from_integer(tree_bound.clone());
    let degree_r = BigRational::from_integer(degree_bound.clone());
    let pass = left <= tree_r && tree_r <= degree_r && degree_r <= factorial_bound;
    Ok(CombinatorialEstimate {
        cluster: w.clone(),
        graph_nodes: n,
        partitions: partitions.len(),
        partition_sum: left.to_string(),
        partition_sum_value: rational_to_f64(&left),
        spanning_trees: tau.to_string(),
        tree_bound: tree_bound.to_f64().unwrap_or(f64::INFINITY),
        degree_bound: degree_bound.to_f64().unwrap_or(f64::INFINITY),
        factorial_bound: rational_to_f64(&factorial_bound),
        pass,
    })
}
