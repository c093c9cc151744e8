//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use cmi_lab::channels::{ChannelLayer, SiteChannel};
use cmi_lab::model::{LocalHamiltonian, Partition, PauliString, SiteGraph, TermSpec};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Mutually commuting Pauli terms of weight ≤ 3 on `n` qubits.
pub fn random_stabilizer_model(rng: &mut impl Rng, n: usize, n_terms: usize) -> LocalHamiltonian {
    let mut accepted: Vec<PauliString> = Vec::new();
    let mut attempts = 0;
    while accepted.len() < n_terms && attempts < 10_000 {
        attempts += 1;
        let width = rng.gen_range(1..=3.min(n));
        let mut sites: Vec<usize> = (0..n).collect();
        sites.shuffle(rng);
        let (mut x, mut z) = (0u64, 0u64);
        for &s in &sites[..width] {
            let letter: u8 = rng.gen_range(1..4);
            x |= ((letter & 1) as u64) << s;
            z |= ((letter >> 1) as u64) << s;
        }
        let p = PauliString::from_bits(n, x, z, rng.gen_bool(0.5)).unwrap();
        if accepted.iter().all(|a| a.commutes_with(&p) && (a.x_bits(), a.z_bits()) != (x, z)) {
            accepted.push(p);
        }
    }
    let terms = accepted.into_iter().map(|pauli| TermSpec::Pauli { pauli, lambda: rng.gen_range(-1.0..=1.0) }).collect();
    LocalHamiltonian::new(SiteGraph::new(n, 2).unwrap(), terms).unwrap()
}

/// Pauli-diagonal channels (dephasing, bit flip, depolarizing) on a random subset of sites.
pub fn random_pauli_layer(rng: &mut impl Rng, n: usize) -> ChannelLayer {
    let mut layer = ChannelLayer::identity(n, 2);
    for s in 0..n {
        if rng.gen_bool(0.5) {
            let p = rng.gen_range(0.0..1.0);
            let c = match rng.gen_range(0..3) {
                0 => SiteChannel::dephasing(s, 2, p),
                1 => SiteChannel::bitflip(s, 2, p),
                _ => SiteChannel::depolarizing(s, 2, p),
            };
            layer.push(c.unwrap()).unwrap();
        }
    }
    layer
}

/// Random diagonal Hamiltonian: one table per nearest-neighbor pair plus random fields.
pub fn random_classical_model(rng: &mut impl Rng, n: usize, q: usize) -> LocalHamiltonian {
    let mut terms = Vec::new();
    for i in 0..n - 1 {
        let table = (0..q * q).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        terms.push(TermSpec::Diagonal { support: vec![i, i + 1], table, lambda: rng.gen_range(-1.0..=1.0) });
    }
    for i in 0..n {
        if rng.gen_bool(0.5) {
            let table = (0..q).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            terms.push(TermSpec::Diagonal { support: vec![i], table, lambda: rng.gen_range(-1.0..=1.0) });
        }
    }
    LocalHamiltonian::new(SiteGraph::new(n, q).unwrap(), terms).unwrap()
}

/// Column-stochastic matrix with entries bounded away from zero.
pub fn random_transition(rng: &mut impl Rng, q: usize) -> DMatrix<f64> {
    let mut t = DMatrix::from_fn(q, q, |_, _| rng.gen_range(0.05..1.0));
    for mut col in t.column_iter_mut() {
        let s: f64 = col.sum();
        col /= s;
    }
    t
}

pub fn random_transition_layer(rng: &mut impl Rng, n: usize, q: usize, sites: &[usize]) -> ChannelLayer {
    let chans = sites.iter().map(|&s| SiteChannel::transition(s, random_transition(rng, q)).unwrap()).collect();
    ChannelLayer::new(n, q, chans).unwrap()
}

/// Contiguous `A | B | C` split with all three blocks nonempty.
pub fn random_partition(rng: &mut impl Rng, n: usize) -> Partition {
    let a = rng.gen_range(1..=n - 2);
    let c = rng.gen_range(1..=n - 1 - a);
    Partition::new((0..a).collect(), (a..n - c).collect(), (n - c..n).collect(), n).unwrap()
}
