use nalgebra::DMatrix;
use serde::Serialize;

use super::pauli::{qubit_mask_to_index, PauliString};
use crate::error::{Error, Result};
use crate::Complex64;

const NORM_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiteGraph {
    n_sites: usize,
    q: usize,
    edges: Option<Vec<(usize, usize)>>,
}

impl SiteGraph {
    pub fn new(n_sites: usize, q: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidModel("n_sites must be at least 1".into()));
        }
        if q < 2 {
            return Err(Error::InvalidModel(format!("local dimension q = {q} must be at least 2")));
        }
        Ok(SiteGraph { n_sites, q, edges: None })
    }

    pub fn with_edges(mut self, edges: Vec<(usize, usize)>) -> Result<Self> {
        if edges.iter().any(|&(a, b)| a >= self.n_sites || b >= self.n_sites) {
            return Err(Error::InvalidModel("edge endpoint outside the site range".into()));
        }
        self.edges = Some(edges);
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn edges(&self) -> Option<&[(usize, usize)]> {
        self.edges.as_deref()
    }

    /// `m` with `q = 2^m`, when sites are made of qubits.
    pub fn qubits_per_site(&self) -> Option<usize> {
        self.q.is_power_of_two().then(|| self.q.trailing_zeros() as usize)
    }

    /// `q^n`, or `None` on overflow.
    pub fn total_dim(&self) -> Option<usize> {
        self.q.checked_pow(self.n_sites as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TermOperator {
    /// Pauli string over all `n_sites * m` qubits.
    Pauli(PauliString),
    /// Real diagonal over `q^{|support|}` local configurations, first support
    /// site most significant.
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianTerm {
    pub index: usize,
    pub support: Vec<usize>,
    pub operator: TermOperator,
    pub lambda: f64,
}

impl HamiltonianTerm {
    pub fn is_diagonal(&self) -> bool {
        match &self.operator {
            TermOperator::Pauli(p) => p.is_diagonal(),
            TermOperator::Diagonal(_) => true,
        }
    }

    pub fn as_pauli(&self) -> Option<&PauliString> {
        match &self.operator {
            TermOperator::Pauli(p) => Some(p),
            TermOperator::Diagonal(_) => None,
        }
    }

    /// Diagonal value `h_a(x)` for a full configuration (one digit per site).
    pub fn diagonal_value(&self, config: &[usize], q: usize) -> Result<f64> {
        match &self.operator {
            TermOperator::Diagonal(table) => {
                let idx = self.support.iter().fold(0usize, |acc, &s| acc * q + config[s]);
                Ok(table[idx])
            }
            TermOperator::Pauli(p) if p.is_diagonal() => {
                let m = q.trailing_zeros() as usize;
                Ok(p.diagonal_value(config_to_qubit_mask(config, m)))
            }
            TermOperator::Pauli(_) => Err(Error::NonDiagonalTerm(self.index)),
        }
    }

    /// Dense matrix of `h_a` on its support sites (support order, first most significant).
    pub fn local_matrix(&self, q: usize) -> Result<DMatrix<Complex64>> {
        self.matrix_on(&self.support, q)
    }

    /// Dense matrix of `h_a` on a superset `sites` of its support.
    pub fn matrix_on(&self, sites: &[usize], q: usize) -> Result<DMatrix<Complex64>> {
        if let Some(s) = self.support.iter().find(|s| !sites.contains(s)) {
            return Err(Error::InvalidModel(format!(
                "term {} touches site {s} outside the requested sites",
                self.index
            )));
        }
        match &self.operator {
            TermOperator::Pauli(p) => {
                let m = q.trailing_zeros() as usize;
                let qubits: Vec<usize> =
                    sites.iter().flat_map(|&s| s * m..(s + 1) * m).collect();
                Ok(p.restrict(&qubits)?.to_dense())
            }
            TermOperator::Diagonal(table) => {
                let k = sites.len();
                let dim = q.pow(k as u32);
                let pos: Vec<usize> = self
                    .support
                    .iter()
                    .map(|s| sites.iter().position(|t| t == s).unwrap())
                    .collect();
                let mut m = DMatrix::zeros(dim, dim);
                let mut digits = vec![0usize; k];
                for i in 0..dim {
                    index_to_digits(i, q, &mut digits);
                    let idx = pos.iter().fold(0usize, |acc, &p| acc * q + digits[p]);
                    m[(i, i)] = Complex64::new(table[idx], 0.0);
                }
                Ok(m)
            }
        }
    }
}

/// Mixed-radix digits of `i`, most significant first.
pub fn index_to_digits(mut i: usize, q: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = i % q;
        i /= q;
    }
}

pub fn digits_to_index(digits: &[usize], q: usize) -> usize {
    digits.iter().fold(0usize, |acc, &d| acc * q + d)
}

/// Qubit mask (bit k = qubit k) for a configuration of sites holding `m` qubits each.
pub fn config_to_qubit_mask(config: &[usize], m: usize) -> u64 {
    let n = config.len() * m;
    let idx = config.iter().fold(0u64, |acc, &d| (acc << m) | d as u64);
    qubit_mask_to_index(idx, n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalHamiltonian {
    graph: SiteGraph,
    terms: Vec<HamiltonianTerm>,
    commuting: bool,
}

/// Term description used by the constructors before indices are assigned.
#[derive(Debug, Clone)]
pub enum TermSpec {
    Pauli { pauli: PauliString, lambda: f64 },
    Diagonal { support: Vec<usize>, table: Vec<f64>, lambda: f64 },
}

impl TermSpec {
    pub fn pauli(s: &str, lambda: f64) -> Result<Self> {
        Ok(TermSpec::Pauli { pauli: s.parse()?, lambda })
    }
}

impl LocalHamiltonian {
    pub fn new(graph: SiteGraph, specs: Vec<TermSpec>) -> Result<Self> {
        let q = graph.q();
        let n = graph.n_sites();
        let mut terms = Vec::with_capacity(specs.len());
        for (index, spec) in specs.into_iter().enumerate() {
            let term = match spec {
                TermSpec::Pauli { pauli, lambda } => {
                    let m = graph.qubits_per_site().ok_or_else(|| {
                        Error::InvalidModel(format!("Pauli term {index} needs q a power of two, got {q}"))
                    })?;
                    if pauli.num_qubits() != n * m {
                        return Err(Error::InvalidModel(format!(
                            "Pauli term {index} has {} qubits, model has {}",
                            pauli.num_qubits(),
                            n * m
                        )));
                    }
                    let support = pauli.site_support(m);
                    HamiltonianTerm { index, support, operator: TermOperator::Pauli(pauli), lambda }
                }
                TermSpec::Diagonal { support, table, lambda } => {
                    let mut sorted = support.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != support.len() || support.is_empty() {
                        return Err(Error::InvalidModel(format!(
                            "term {index}: support must be nonempty without repeats"
                        )));
                    }
                    if let Some(s) = support.iter().find(|&&s| s >= n) {
                        return Err(Error::InvalidModel(format!("term {index}: site {s} out of range")));
                    }
                    let expected = q.checked_pow(support.len() as u32).unwrap_or(usize::MAX);
                    if table.len() != expected {
                        return Err(Error::InvalidModel(format!(
                            "term {index}: diagonal table has {} entries, expected {expected}",
                            table.len()
                        )));
                    }
                    if let Some(v) = table.iter().find(|v| !v.is_finite() || v.abs() > 1.0 + NORM_SLACK) {
                        return Err(Error::InvalidModel(format!(
                            "term {index}: diagonal entry {v} violates the operator-norm bound 1"
                        )));
                    }
                    // Canonical support order is ascending; permute the table if needed.
                    let table = if sorted == support {
                        table
                    } else {
                        reorder_table(&table, &support, &sorted, q)
                    };
                    HamiltonianTerm { index, support: sorted, operator: TermOperator::Diagonal(table), lambda }
                }
            };
            if !term.lambda.is_finite() || term.lambda.abs() > 1.0 + NORM_SLACK {
                return Err(Error::InvalidModel(format!(
                    "term {index}: |lambda| = {} exceeds 1",
                    term.lambda.abs()
                )));
            }
            terms.push(term);
        }
        let mut h = LocalHamiltonian { graph, terms, commuting: false };
        h.commuting = verify_commuting(&h);
        Ok(h)
    }

    pub fn graph(&self) -> &SiteGraph {
        &self.graph
    }
    pub fn terms(&self) -> &[HamiltonianTerm] {
        &self.terms
    }
    pub fn n_sites(&self) -> usize {
        self.graph.n_sites()
    }
    pub fn q(&self) -> usize {
        self.graph.q()
    }
    pub fn is_commuting(&self) -> bool {
        self.commuting
    }
    pub fn is_diagonal(&self) -> bool {
        self.terms.iter().all(HamiltonianTerm::is_diagonal)
    }
    pub fn is_pauli(&self) -> bool {
        self.terms.iter().all(|t| t.as_pauli().is_some())
    }

    /// Same terms with every coefficient replaced.
    pub fn with_lambdas(&self, lambdas: &[f64]) -> Result<Self> {
        if lambdas.len() != self.terms.len() {
            return Err(Error::InvalidModel("one coefficient per term required".into()));
        }
        let mut h = self.clone();
        for (t, &l) in h.terms.iter_mut().zip(lambdas) {
            if !l.is_finite() || l.abs() > 1.0 + NORM_SLACK {
                return Err(Error::InvalidModel(format!("|lambda| = {} exceeds 1", l.abs())));
            }
            t.lambda = l;
        }
        Ok(h)
    }

    /// Model with sites relabeled by `perm` (old site `s` becomes `perm[s]`).
    pub fn permute_sites(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_sites();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidModel("site permutation is not a bijection".into()));
        }
        let q = self.q();
        let specs = self
            .terms
            .iter()
            .map(|t| match &t.operator {
                TermOperator::Pauli(p) => {
                    let m = self.graph.qubits_per_site().unwrap_or(1);
                    let qubits: Vec<usize> = (0..n * m).map(|k| perm[k / m] * m + k % m).collect();
                    let moved = p.restrict(&(0..n * m).collect::<Vec<_>>())?.embed(n * m, &qubits)?;
                    Ok(TermSpec::Pauli { pauli: moved, lambda: t.lambda })
                }
                TermOperator::Diagonal(table) => Ok(TermSpec::Diagonal {
                    support: t.support.iter().map(|&s| perm[s]).collect(),
                    table: table.clone(),
                    lambda: t.lambda,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut graph = SiteGraph::new(n, q)?;
        if let Some(e) = self.graph.edges() {
            graph = graph.with_edges(e.iter().map(|&(a, b)| (perm[a], perm[b])).collect())?;
        }
        LocalHamiltonian::new(graph, specs)
    }

    /// Dense matrix of `H = Σ λ_a h_a` on all sites.
    pub fn dense_matrix(&self) -> Result<DMatrix<Complex64>> {
        let sites: Vec<usize> = (0..self.n_sites()).collect();
        let dim = self.graph.total_dim().ok_or(Error::CapExceeded {
            what: "dense dimension",
            value: usize::MAX,
            cap: crate::Caps::get().dense_dim,
        })?;
        crate::caps::check("dense dimension", dim, crate::Caps::get().dense_dim)?;
        let mut m = DMatrix::zeros(dim, dim);
        for t in &self.terms {
            m += t.matrix_on(&sites, self.q())? * Complex64::new(t.lambda, 0.0);
        }
        Ok(m)
    }
}

fn reorder_table(table: &[f64], from: &[usize], to: &[usize], q: usize) -> Vec<f64> {
    let k = from.len();
    let pos: Vec<usize> = from.iter().map(|s| to.iter().position(|t| t == s).unwrap()).collect();
    let mut out = vec![0.0; table.len()];
    let mut digits = vec![0usize; k];
    let mut sorted_digits = vec![0usize; k];
    for (i, &v) in table.iter().enumerate() {
        index_to_digits(i, q, &mut digits);
        for (j, &p) in pos.iter().enumerate() {
            sorted_digits[p] = digits[j];
        }
        out[digits_to_index(&sorted_digits, q)] = v;
    }
    out
}

/// True iff every pair of terms commutes (symplectic test for Pauli pairs,
/// diagonal pairs always commute, otherwise a dense commutator on the joint support).
pub fn verify_commuting(h: &LocalHamiltonian) -> bool {
    let terms = h.terms();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            if !pair_commutes(a, b, h.q()) {
                return false;
            }
        }
    }
    true
}

fn pair_commutes(a: &HamiltonianTerm, b: &HamiltonianTerm, q: usize) -> bool {
    if a.is_diagonal() && b.is_diagonal() {
        return true;
    }
    if let (Some(pa), Some(pb)) = (a.as_pauli(), b.as_pauli()) {
        return pa.commutes_with(pb);
    }
    if !a.support.iter().any(|s| b.support.contains(s)) {
        return true;
    }
    let mut joint: Vec<usize> = a.support.iter().chain(&b.support).copied().collect();
    joint.sort_unstable();
    joint.dedup();
    match (a.matrix_on(&joint, q), b.matrix_on(&joint, q)) {
        (Ok(ma), Ok(mb)) => (&ma * &mb - &mb * &ma).norm() <= 1e-12,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anticommuting_pair_detected() {
        let g = SiteGraph::new(1, 2).unwrap();
        let h = LocalHamiltonian::new(
            g,
            vec![TermSpec::pauli("X", 1.0).unwrap(), TermSpec::pauli("Z", 1.0).unwrap()],
        )
        .unwrap();
        assert!(!h.is_commuting());
    }

    #[test]
    fn rejects_large_coefficients_and_entries() {
        let g = SiteGraph::new(2, 2).unwrap();
        assert!(LocalHamiltonian::new(g.clone(), vec![TermSpec::pauli("ZZ", 1.5).unwrap()]).is_err());
        let bad = TermSpec::Diagonal { support: vec![0], table: vec![0.5, -1.2], lambda: 1.0 };
        assert!(LocalHamiltonian::new(g.clone(), vec![bad]).is_err());
        let short = TermSpec::Diagonal { support: vec![0, 1], table: vec![0.5, -1.0], lambda: 1.0 };
        assert!(LocalHamiltonian::new(g, vec![short]).is_err());
    }

    #[test]
    fn diagonal_table_reordered_to_ascending_support() {
        let g = SiteGraph::new(2, 3).unwrap();
        let table: Vec<f64> = (0..9).map(|i| i as f64 / 10.0).collect();
        let spec = TermSpec::Diagonal { support: vec![1, 0], table: table.clone(), lambda: 1.0 };
        let h = LocalHamiltonian::new(g, vec![spec]).unwrap();
        let t = &h.terms()[0];
        assert_eq!(t.support, vec![0, 1]);
        // config (site0 = a, site1 = b) was entry (b, a) in the original order
        for a in 0..3 {
            for b in 0..3 {
                let v = t.diagonal_value(&[a, b], 3).unwrap();
                assert_eq!(v, table[b * 3 + a]);
            }
        }
    }

    #[test]
    fn pauli_term_on_four_dim_sites() {
        let g = SiteGraph::new(2, 4).unwrap();
        let h = LocalHamiltonian::new(g, vec![TermSpec::pauli("IZZI", -1.0).unwrap()]).unwrap();
        assert_eq!(h.terms()[0].support, vec![0, 1]);
        // site digit = 2*b_left + b_right; ZZ on qubits 1 and 2
        let v = h.terms()[0].diagonal_value(&[1, 2], 4).unwrap();
        assert_eq!(v, 1.0);
        let v = h.terms()[0].diagonal_value(&[1, 0], 4).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn matrix_on_matches_dense_of_full_string() {
        let g = SiteGraph::new(3, 2).unwrap();
        let h = LocalHamiltonian::new(g, vec![TermSpec::pauli("XIZ", 1.0).unwrap()]).unwrap();
        let full = h.terms()[0].matrix_on(&[0, 1, 2], 2).unwrap();
        let p: PauliString = "XIZ".parse().unwrap();
        assert!((full - p.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn site_permutation_reverses_chain() {
        let g = SiteGraph::new(3, 2).unwrap();
        let h = LocalHamiltonian::new(g, vec![TermSpec::pauli("XZI", 0.5).unwrap()]).unwrap();
        let r = h.permute_sites(&[2, 1, 0]).unwrap();
        assert_eq!(r.terms()[0].as_pauli().unwrap().to_string(), "IZX");
        assert_eq!(r.terms()[0].support, vec![1, 2]);
    }
}
