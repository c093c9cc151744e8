//! Builtin model families.
//!
//! Parity and Bell chains use sites of dimension 4 (two qubits per site);
//! the bond between sites `i` and `i+1` couples qubit `2i+1` to qubit `2i+2`.

use super::hamiltonian::{LocalHamiltonian, SiteGraph, TermSpec};
use super::pauli::PauliString;
use crate::error::{Error, Result};

fn two_body(n_qubits: usize, a: usize, b: usize, letter: char) -> Result<PauliString> {
    let pa = PauliString::single(n_qubits, a, letter)?;
    let pb = PauliString::single(n_qubits, b, letter)?;
    pa.mul_commuting(&pb)
}

fn chain_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect()
}

/// Classical Ising chain `H = λ Σ Z_i Z_{i+1}` (ferromagnetic for λ < 0).
pub fn ising_chain(n: usize, lambda: f64) -> Result<LocalHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidModel("Ising chain needs at least 2 sites".into()));
    }
    let graph = SiteGraph::new(n, 2)?.with_edges(chain_edges(n))?;
    let terms = (0..n - 1)
        .map(|i| Ok(TermSpec::Pauli { pauli: two_body(n, i, i + 1, 'Z')?, lambda }))
        .collect::<Result<Vec<_>>>()?;
    LocalHamiltonian::new(graph, terms)
}

/// Nearest-neighbor Ising model on an open `rows × cols` grid, site `r*cols + c`.
pub fn ising_lattice(rows: usize, cols: usize, lambda: f64) -> Result<LocalHamiltonian> {
    let n = rows * cols;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let s = r * cols + c;
            if c + 1 < cols {
                edges.push((s, s + 1));
            }
            if r + 1 < rows {
                edges.push((s, s + cols));
            }
        }
    }
    let terms = edges
        .iter()
        .map(|&(a, b)| Ok(TermSpec::Pauli { pauli: two_body(n, a, b, 'Z')?, lambda }))
        .collect::<Result<Vec<_>>>()?;
    LocalHamiltonian::new(SiteGraph::new(n, 2)?.with_edges(edges)?, terms)
}

/// Four-body `ZZZZ` plaquettes on an open grid of `rows × cols` sites.
pub fn plaquette_lattice(rows: usize, cols: usize, lambda: f64) -> Result<LocalHamiltonian> {
    let n = rows * cols;
    let mut terms = Vec::new();
    for r in 0..rows.saturating_sub(1) {
        for c in 0..cols.saturating_sub(1) {
            let sites = [r * cols + c, r * cols + c + 1, (r + 1) * cols + c, (r + 1) * cols + c + 1];
            let z = sites.iter().fold(0u64, |acc, &s| acc | (1 << s));
            terms.push(TermSpec::Pauli { pauli: PauliString::from_bits(n, 0, z, false)?, lambda });
        }
    }
    LocalHamiltonian::new(SiteGraph::new(n, 2)?, terms)
}

/// Open cluster chain `H = λ Σ_i Z_{i-1} X_i Z_{i+1}`; λ = −1 makes the
/// +1 stabilizer cluster state the ground state.
pub fn cluster_chain_with(n: usize, lambda: f64) -> Result<LocalHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidModel("cluster chain needs at least 2 sites".into()));
    }
    let graph = SiteGraph::new(n, 2)?.with_edges(chain_edges(n))?;
    let terms = (0..n)
        .map(|i| {
            let mut p = PauliString::single(n, i, 'X')?;
            if i > 0 {
                p = p.mul_commuting(&PauliString::single(n, i - 1, 'Z')?)?;
            }
            if i + 1 < n {
                p = p.mul_commuting(&PauliString::single(n, i + 1, 'Z')?)?;
            }
            Ok(TermSpec::Pauli { pauli: p, lambda })
        })
        .collect::<Result<Vec<_>>>()?;
    LocalHamiltonian::new(graph, terms)
}

pub fn cluster_chain(n: usize) -> Result<LocalHamiltonian> {
    cluster_chain_with(n, -1.0)
}

/// Chain of two-bit sites where neighboring sites share a ferromagnetic `ZZ` bond.
pub fn parity_chain(n: usize) -> Result<LocalHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidModel("parity chain needs at least 2 sites".into()));
    }
    let nq = 2 * n;
    let graph = SiteGraph::new(n, 4)?.with_edges(chain_edges(n))?;
    let terms = (0..n - 1)
        .map(|i| Ok(TermSpec::Pauli { pauli: two_body(nq, 2 * i + 1, 2 * i + 2, 'Z')?, lambda: -1.0 }))
        .collect::<Result<Vec<_>>>()?;
    LocalHamiltonian::new(graph, terms)
}

/// Chain of two-qubit sites where each bond carries `-(XX + ZZ)`, whose ground
/// state is a product of Bell pairs across the bonds.
pub fn bell_chain(n: usize) -> Result<LocalHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidModel("Bell chain needs at least 2 sites".into()));
    }
    let nq = 2 * n;
    let graph = SiteGraph::new(n, 4)?.with_edges(chain_edges(n))?;
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        for letter in ['X', 'Z'] {
            terms.push(TermSpec::Pauli { pauli: two_body(nq, 2 * i + 1, 2 * i + 2, letter)?, lambda: -1.0 });
        }
    }
    LocalHamiltonian::new(graph, terms)
}

/// Model family addressed by the zoo ids `<family>_n<N>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    IsingChain,
    ParityChain,
    BellChain,
    ClusterChain,
}

impl Family {
    pub fn build(self, n: usize) -> Result<LocalHamiltonian> {
        match self {
            Family::IsingChain => ising_chain(n, -1.0),
            Family::ParityChain => parity_chain(n),
            Family::BellChain => bell_chain(n),
            Family::ClusterChain => cluster_chain(n),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::IsingChain => "ising_chain",
            Family::ParityChain => "parity_chain",
            Family::BellChain => "bell_chain",
            Family::ClusterChain => "cluster_chain",
        }
    }

    pub fn id(self, n: usize) -> String {
        format!("{}_n{n}", self.name())
    }
}

/// Parses `ising_chain_n6` style ids into family and size.
pub fn parse_id(id: &str) -> Result<(Family, usize)> {
    let (family, n) = id
        .rsplit_once("_n")
        .ok_or_else(|| Error::InvalidModel(format!("unknown model id {id:?}")))?;
    let n: usize = n.parse().map_err(|_| Error::InvalidModel(format!("bad size in model id {id:?}")))?;
    let family = match family {
        "ising_chain" => Family::IsingChain,
        "parity_chain" => Family::ParityChain,
        "bell_chain" => Family::BellChain,
        "cluster_chain" => Family::ClusterChain,
        _ => return Err(Error::InvalidModel(format!("unknown model family in {id:?}"))),
    };
    Ok((family, n))
}

pub fn by_id(id: &str) -> Result<LocalHamiltonian> {
    let (family, n) = parse_id(id)?;
    family.build(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_models_commute() {
        for id in ["ising_chain_n5", "parity_chain_n4", "bell_chain_n4", "cluster_chain_n6"] {
            let h = by_id(id).unwrap();
            assert!(h.is_commuting(), "{id}");
        }
        assert!(ising_lattice(2, 3, -1.0).unwrap().is_commuting());
    }

    #[test]
    fn cluster_chain_terms() {
        let h = cluster_chain(4).unwrap();
        let s: Vec<String> = h.terms().iter().map(|t| t.as_pauli().unwrap().to_string()).collect();
        assert_eq!(s, vec!["XZII", "ZXZI", "IZXZ", "IIZX"]);
        assert!(h.terms().iter().all(|t| t.lambda == -1.0));
    }

    #[test]
    fn bell_chain_bonds() {
        let h = bell_chain(3).unwrap();
        let s: Vec<String> = h.terms().iter().map(|t| t.as_pauli().unwrap().to_string()).collect();
        assert_eq!(s, vec!["IXXIII", "IZZIII", "IIIXXI", "IIIZZI"]);
        assert_eq!(h.terms()[2].support, vec![1, 2]);
    }

    #[test]
    fn ids_round_trip() {
        assert_eq!(parse_id("bell_chain_n12").unwrap(), (Family::BellChain, 12));
        assert!(by_id("toric_n3").is_err());
        assert!(by_id("ising_chain_nx").is_err());
    }
}
