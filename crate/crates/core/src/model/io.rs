//! JSON model files:
//! `{"q": 2, "n_sites": 3, "terms": [{"support": [0, 1], "pauli": "ZZ", "lambda": -1.0}]}`.
//!
//! Pauli letters are listed per support site in support order, `m` letters per
//! site when `q = 2^m`. Diagonal terms give `q^{|support|}` values with the
//! first support site most significant.

use serde::{Deserialize, Serialize};

use super::hamiltonian::{LocalHamiltonian, SiteGraph, TermOperator, TermSpec};
use super::pauli::PauliString;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub q: usize,
    pub n_sites: usize,
    pub terms: Vec<TermFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub support: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<Vec<f64>>,
    pub lambda: f64,
}

impl ModelFile {
    pub fn to_hamiltonian(&self) -> Result<LocalHamiltonian> {
        let graph = SiteGraph::new(self.n_sites, self.q)?;
        let specs = self
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| term_spec(i, t, &graph))
            .collect::<Result<Vec<_>>>()?;
        LocalHamiltonian::new(graph, specs)
    }

    pub fn from_hamiltonian(h: &LocalHamiltonian) -> Result<Self> {
        let m = h.graph().qubits_per_site().unwrap_or(1);
        let terms = h
            .terms()
            .iter()
            .map(|t| match &t.operator {
                TermOperator::Pauli(p) => {
                    let qubits: Vec<usize> =
                        t.support.iter().flat_map(|&s| s * m..(s + 1) * m).collect();
                    let local = p.restrict(&qubits)?.to_string();
                    let (sign, letters) = match local.strip_prefix('-') {
                        Some(rest) => (-1.0, rest.to_string()),
                        None => (1.0, local),
                    };
                    Ok(TermFile { support: t.support.clone(), pauli: Some(letters), diag: None, lambda: sign * t.lambda })
                }
                TermOperator::Diagonal(table) => Ok(TermFile {
                    support: t.support.clone(),
                    pauli: None,
                    diag: Some(table.clone()),
                    lambda: t.lambda,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelFile { q: h.q(), n_sites: h.n_sites(), terms })
    }
}

fn term_spec(i: usize, t: &TermFile, graph: &SiteGraph) -> Result<TermSpec> {
    match (&t.pauli, &t.diag) {
        (Some(letters), None) => {
            let m = graph.qubits_per_site().ok_or_else(|| {
                Error::InvalidModel(format!("term {i}: Pauli terms need q a power of two"))
            })?;
            let local: PauliString = letters.parse()?;
            if local.num_qubits() != t.support.len() * m {
                return Err(Error::InvalidModel(format!(
                    "term {i}: {} Pauli letters for {} support sites of {m} qubits",
                    local.num_qubits(),
                    t.support.len()
                )));
            }
            if let Some(s) = t.support.iter().find(|&&s| s >= graph.n_sites()) {
                return Err(Error::InvalidModel(format!("term {i}: site {s} out of range")));
            }
            let qubits: Vec<usize> = t.support.iter().flat_map(|&s| s * m..(s + 1) * m).collect();
            let pauli = local.embed(graph.n_sites() * m, &qubits)?;
            let mut declared = t.support.clone();
            declared.sort_unstable();
            if pauli.site_support(m) != declared {
                return Err(Error::InvalidModel(format!(
                    "term {i}: declared support does not match the non-identity sites of {letters:?}"
                )));
            }
            Ok(TermSpec::Pauli { pauli, lambda: t.lambda })
        }
        (None, Some(table)) => Ok(TermSpec::Diagonal {
            support: t.support.clone(),
            table: table.clone(),
            lambda: t.lambda,
        }),
        _ => Err(Error::InvalidModel(format!("term {i}: give exactly one of \"pauli\" or \"diag\""))),
    }
}

pub fn parse_model(json: &str) -> Result<LocalHamiltonian> {
    let file: ModelFile = serde_json::from_str(json)?;
    file.to_hamiltonian()
}

pub fn load_model(path: &std::path::Path) -> Result<LocalHamiltonian> {
    parse_model(&std::fs::read_to_string(path)?)
}
