//! Gibbs states of commuting Pauli Hamiltonians in the Pauli basis.
//!
//! `e^{-βH} ∝ Π_a (I - tanh(βλ_a) h_a)` is expanded into `Σ_g c_g σ(g)` with
//! group elements keyed by `(x, z)` bits and the sign carried by `c_g`.
//! Marginal spectra come from characters of the restricted abelian group.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::BuildHasherDefault;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::caps::{self, Caps};
use crate::channels::{ChannelLayer, DampingProfile};
use crate::dense::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::{product_phase, LocalHamiltonian, Partition, PauliString};
use crate::{Complex64, LN2};

/// Coefficients below this magnitude are dropped.
pub const PRUNE: f64 = 1e-18;
const EIGEN_CLAMP: f64 = 1e-15;
const NEGATIVE_TOL: f64 = 1e-10;

type FixedMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PauliExpansion {
    n_sites: usize,
    m: usize,
    /// `(x, z, c_g)` sorted by key; the identity has `c_I = 1` at construction.
    entries: Vec<(u64, u64, f64)>,
    generators: Vec<PauliString>,
    /// `Σ_a ln cosh(βλ_a)`, the factor dropped from the tanh form.
    log_scale: f64,
}

fn site_mask(sites: &[usize], m: usize) -> u64 {
    sites.iter().fold(0u64, |acc, &s| acc | (((1u64 << m) - 1) << (s * m)))
}

impl PauliExpansion {
    pub fn n_qubits(&self) -> usize {
        self.n_sites * self.m
    }
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn qubits_per_site(&self) -> usize {
        self.m
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }
    pub fn entries(&self) -> &[(u64, u64, f64)] {
        &self.entries
    }

    pub fn coefficient(&self, x: u64, z: u64) -> f64 {
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&(x, z)))
            .map(|i| self.entries[i].2)
            .unwrap_or(0.0)
    }

    pub fn identity_coefficient(&self) -> f64 {
        self.coefficient(0, 0)
    }

    /// Coefficient of `e^{-βH}` itself, `exp(log_scale) c_g` (finite β only).
    pub fn unnormalized_coefficient(&self, x: u64, z: u64) -> f64 {
        self.log_scale.exp() * self.coefficient(x, z)
    }

    /// Largest `|c_g/c_I - c'_g/c'_I|` over the union of keys.
    pub fn max_normalized_deviation(&self, other: &PauliExpansion) -> f64 {
        let (ia, ib) = (self.identity_coefficient(), other.identity_coefficient());
        let mut dev = 0.0f64;
        for &(x, z, c) in &self.entries {
            dev = dev.max((c / ia - other.coefficient(x, z) / ib).abs());
        }
        for &(x, z, c) in &other.entries {
            dev = dev.max((c / ib - self.coefficient(x, z) / ia).abs());
        }
        dev
    }

    /// Normalized dense state; small registers only.
    pub fn to_density_matrix(&self) -> Result<DensityMatrix> {
        let nq = self.n_qubits();
        let dim = 1usize << nq;
        caps::check("dense dimension", dim, Caps::get().dense_dim)?;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        let norm = self.identity_coefficient() * dim as f64;
        for &(x, z, c) in &self.entries {
            let p = PauliString::from_bits(nq, x, z, false)?;
            m += p.to_dense() * Complex64::new(c / norm, 0.0);
        }
        DensityMatrix::new(self.n_sites, 1 << self.m, m)
    }
}

/// Expands `e^{-βH}` for a commuting Pauli Hamiltonian; `β = ∞` is allowed.
pub fn expand_gibbs(h: &LocalHamiltonian, beta: f64) -> Result<PauliExpansion> {
    if !(beta >= 0.0) {
        return Err(Error::Config(format!("beta = {beta} must be nonnegative")));
    }
    let m = h.graph().qubits_per_site().ok_or_else(|| Error::Unsupported("Pauli engine needs q = 2^m".into()))?;
    if !h.is_pauli() {
        return Err(Error::Unsupported("Pauli engine needs Pauli terms only; use the dense engine".into()));
    }
    if !h.is_commuting() {
        return Err(Error::NonCommuting);
    }
    caps::check("Pauli terms", h.terms().len(), Caps::get().pauli_terms)?;
    let mut map: FixedMap<(u64, u64), f64> = FixedMap::default();
    map.insert((0, 0), 1.0);
    let mut log_scale = 0.0;
    let mut generators = Vec::new();
    for t in h.terms() {
        let p = t.as_pauli().expect("checked Pauli");
        let bl = beta * t.lambda;
        let tanh = if beta.is_infinite() { t.lambda.signum() * (t.lambda != 0.0) as u8 as f64 } else { bl.tanh() };
        log_scale += if beta.is_infinite() {
            if t.lambda != 0.0 { f64::INFINITY } else { 0.0 }
        } else {
            log_cosh(bl)
        };
        generators.push(*p);
        if tanh == 0.0 {
            continue;
        }
        let weight = -tanh * p.sign();
        let (hx, hz) = (p.x_bits(), p.z_bits());
        let mut next: FixedMap<(u64, u64), f64> = FixedMap::default();
        next.reserve(map.len() * 2);
        let mut keys: Vec<(&(u64, u64), &f64)> = map.iter().collect();
        keys.sort_unstable_by_key(|(k, _)| **k);
        for (&(x, z), &c) in keys {
            *next.entry((x, z)).or_insert(0.0) += c;
            let e = product_phase(x, z, hx, hz);
            let s = if e == 0 { 1.0 } else { -1.0 };
            *next.entry((x ^ hx, z ^ hz)).or_insert(0.0) += s * weight * c;
        }
        next.retain(|_, c| c.abs() >= PRUNE);
        map = next;
    }
    let mut entries: Vec<(u64, u64, f64)> = map.into_iter().map(|((x, z), c)| (x, z, c)).collect();
    entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    Ok(PauliExpansion { n_sites: h.n_sites(), m, entries, generators, log_scale })
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN2
}

/// `c_g ← c_g Π_i f_i(g|_i)`; coefficients below [`PRUNE`] are dropped.
pub fn apply_pauli_layer(e: &PauliExpansion, layer: &ChannelLayer) -> Result<PauliExpansion> {
    if layer.n_sites() != e.n_sites || layer.q() != 1 << e.m {
        return Err(Error::Consistency("layer and expansion disagree on sites or q".into()));
    }
    let profiles: Vec<(usize, DampingProfile)> = layer
        .iter()
        .map(|c| Ok((c.site(), c.pauli_damping_profile()?)))
        .collect::<Result<Vec<_>>>()?;
    let m = e.m;
    let local = (1u64 << m) - 1;
    let entries = e
        .entries
        .iter()
        .filter_map(|&(x, z, c)| {
            let mut f = 1.0;
            for (s, prof) in &profiles {
                let (lx, lz) = ((x >> (s * m)) & local, (z >> (s * m)) & local);
                if lx | lz != 0 {
                    f *= prof.factor(lx, lz);
                }
            }
            let v = c * f;
            (v.abs() >= PRUNE).then_some((x, z, v))
        })
        .collect();
    Ok(PauliExpansion { n_sites: e.n_sites, m, entries, generators: e.generators.clone(), log_scale: e.log_scale })
}

/// Independent generators of the elements supported inside a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictedGroup {
    pub region: Vec<usize>,
    pub generators: Vec<(u64, u64)>,
    pub rank: usize,
}

/// F2 elimination over `(x, z)` vectors that also records which generators
/// make up each reduced row.
struct Eliminator {
    rows: Vec<(u128, u32, u32)>,
    generators: Vec<(u64, u64)>,
}

impl Eliminator {
    fn new() -> Self {
        Eliminator { rows: Vec::new(), generators: Vec::new() }
    }

    fn reduce(&self, mut v: u128) -> (u128, u32) {
        let mut combo = 0u32;
        for &(row, c, pivot) in &self.rows {
            if (v >> pivot) & 1 == 1 {
                v ^= row;
                combo ^= c;
            }
        }
        (v, combo)
    }

    fn insert(&mut self, x: u64, z: u64, rank_cap: usize) -> Result<()> {
        let (v, combo) = self.reduce(pack(x, z));
        if v != 0 {
            let j = self.generators.len();
            if j >= rank_cap.min(32) {
                return Err(Error::CapExceeded { what: "restricted group rank", value: j + 1, cap: rank_cap });
            }
            self.generators.push((x, z));
            self.rows.push((v, combo ^ (1 << j), 127 - v.leading_zeros()));
        }
        Ok(())
    }
}

fn pack(x: u64, z: u64) -> u128 {
    (x as u128) | ((z as u128) << 64)
}

pub fn restricted_group(e: &PauliExpansion, region: &[usize]) -> Result<RestrictedGroup> {
    let mask = site_mask(region, e.m);
    let mut elim = Eliminator::new();
    for &(x, z, _) in &e.entries {
        if (x | z) & !mask == 0 {
            elim.insert(x, z, Caps::get().pauli_rank)?;
        }
    }
    let rank = elim.generators.len();
    Ok(RestrictedGroup { region: region.to_vec(), generators: elim.generators, rank })
}

/// Spectrum of the normalized marginal on `region` as `(eigenvalue, multiplicity)`.
pub fn marginal_spectrum(e: &PauliExpansion, region: &[usize]) -> Result<Vec<(f64, f64)>> {
    let mut region = region.to_vec();
    region.sort_unstable();
    region.dedup();
    if region.iter().any(|&s| s >= e.n_sites) {
        return Err(Error::InvalidPartition("region outside the register".into()));
    }
    let mask = site_mask(&region, e.m);
    let inside: Vec<(u64, u64, f64)> = e.entries.iter().copied().filter(|&(x, z, _)| (x | z) & !mask == 0).collect();
    let mut elim = Eliminator::new();
    for &(x, z, _) in &inside {
        elim.insert(x, z, Caps::get().pauli_rank)?;
    }
    let r = elim.generators.len();
    let mut a = vec![0.0f64; 1usize << r];
    for &(x, z, c) in &inside {
        let (rest, combo) = elim.reduce(pack(x, z));
        if rest != 0 {
            return Err(Error::Consistency("element outside the span of its generators".into()));
        }
        // σ(gen_1)…σ(gen_k) = ε σ(g) with ε = ±1 since everything commutes.
        let (mut px, mut pz, mut phase) = (0u64, 0u64, 0u32);
        let mut bits = combo;
        while bits != 0 {
            let j = bits.trailing_zeros() as usize;
            let (gx, gz) = elim.generators[j];
            phase = (phase + product_phase(px, pz, gx, gz)) % 4;
            px ^= gx;
            pz ^= gz;
            bits &= bits - 1;
        }
        if phase % 2 != 0 || (px, pz) != (x, z) {
            return Err(Error::Consistency("restricted group is not abelian".into()));
        }
        let eps = if phase == 0 { 1.0 } else { -1.0 };
        a[combo as usize] += eps * c;
    }
    walsh_hadamard(&mut a);
    let l = (region.len() * e.m) as i32;
    let norm = e.identity_coefficient() * 2f64.powi(l);
    let mult = 2f64.powi(l - r as i32);
    let mut spectrum = Vec::with_capacity(a.len());
    for v in a {
        let lam = v / norm;
        if lam < -NEGATIVE_TOL {
            return Err(Error::Consistency(format!("negative eigenvalue {lam:e} in Pauli marginal")));
        }
        spectrum.push((lam, mult));
    }
    Ok(spectrum)
}

fn walsh_hadamard(a: &mut [f64]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*u + *v, *u - *v);
                *u = s;
                *v = d;
            }
        }
        h *= 2;
    }
}

/// Entropy of the marginal on `region`, in bits.
pub fn marginal_entropy(e: &PauliExpansion, region: &[usize]) -> Result<f64> {
    if region.is_empty() {
        return Ok(0.0);
    }
    let spectrum = marginal_spectrum(e, region)?;
    let nats: f64 = spectrum
        .iter()
        .filter(|(l, _)| *l > EIGEN_CLAMP)
        .map(|(l, k)| -k * l * l.ln())
        .sum();
    Ok(nats / LN2)
}

pub fn pauli_cmi(e: &PauliExpansion, p: &Partition) -> Result<f64> {
    let [ab, bc, b, abc] = p.regions();
    Ok(marginal_entropy(e, &ab)? + marginal_entropy(e, &bc)? - marginal_entropy(e, &b)? - marginal_entropy(e, &abc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::SiteChannel;
    use crate::dense;
    use crate::model::{zoo, SiteGraph, TermSpec};

    #[test]
    fn single_term_expansion() {
        let h = LocalHamiltonian::new(SiteGraph::new(2, 2).unwrap(), vec![TermSpec::pauli("ZZ", 1.0).unwrap()]).unwrap();
        let beta: f64 = 0.6;
        let e = expand_gibbs(&h, beta).unwrap();
        assert!((e.unnormalized_coefficient(0, 0) - beta.cosh()).abs() < 1e-14);
        assert!((e.unnormalized_coefficient(0, 0b11) + beta.sinh()).abs() < 1e-14);
        let e0 = expand_gibbs(&h, 0.0).unwrap();
        assert_eq!(e0.entries(), &[(0, 0, 1.0)]);
    }

    #[test]
    fn collisions_match_dense() {
        // h3 = h1 h2 gives coinciding group elements.
        let terms = vec![
            TermSpec::pauli("XXI", -0.7).unwrap(),
            TermSpec::pauli("IZZ", 0.4).unwrap(),
            TermSpec::pauli("ZZI", 1.0).unwrap(),
            TermSpec::pauli("-YYI", 0.5).unwrap(),
        ];
        let h = LocalHamiltonian::new(SiteGraph::new(3, 2).unwrap(), terms).unwrap();
        assert!(!h.is_commuting());
        let terms = vec![
            TermSpec::pauli("XXI", -0.7).unwrap(),
            TermSpec::pauli("ZZI", 1.0).unwrap(),
            TermSpec::pauli("-YYI", 0.5).unwrap(),
            TermSpec::pauli("XXZ", 0.3).unwrap(),
        ];
        let h = LocalHamiltonian::new(SiteGraph::new(3, 2).unwrap(), terms).unwrap();
        assert!(h.is_commuting());
        let e = expand_gibbs(&h, 0.9).unwrap();
        let d = dense::gibbs_state(&h, 0.9).unwrap();
        assert!((e.to_density_matrix().unwrap().matrix() - d.matrix()).norm() < 1e-12);
    }

    #[test]
    fn single_term_entropy() {
        let h = LocalHamiltonian::new(SiteGraph::new(2, 2).unwrap(), vec![TermSpec::pauli("XX", 1.0).unwrap()]).unwrap();
        let beta: f64 = 0.8;
        let e = expand_gibbs(&h, beta).unwrap();
        let p = (1.0 + beta.tanh()) / 2.0;
        // two eigenvalues p/2 and (1-p)/2, each doubly degenerate
        let want = 1.0 - (p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        assert!((marginal_entropy(&e, &[0, 1]).unwrap() - want).abs() < 1e-12);
        let d = dense::gibbs_state(&h, beta).unwrap();
        assert!((dense::von_neumann_entropy(&d) - want).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_marginals() {
        let h = zoo::cluster_chain(5).unwrap();
        let e = expand_gibbs(&h, 0.0).unwrap();
        assert!((marginal_entropy(&e, &[0, 2, 3]).unwrap() - 3.0).abs() < 1e-12);
        let p = Partition::new(vec![0], vec![1, 2], vec![3], 5).unwrap();
        assert!(pauli_cmi(&e, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn cluster_marginals_match_dense() {
        let h = zoo::cluster_chain(6).unwrap();
        let beta = 0.7;
        let e = expand_gibbs(&h, beta).unwrap();
        let d = dense::gibbs_state(&h, beta).unwrap();
        for mask in 1u32..64 {
            let region: Vec<usize> = (0..6).filter(|i| (mask >> i) & 1 == 1).collect();
            let a = marginal_entropy(&e, &region).unwrap();
            let b = dense::region_entropy(&d, &region).unwrap();
            assert!((a - b).abs() < 1e-10, "{region:?}: {a} vs {b}");
        }
    }

    #[test]
    fn bell_chain_two_bits() {
        let n = 6;
        let h = zoo::bell_chain(n).unwrap();
        let e = expand_gibbs(&h, f64::INFINITY).unwrap();
        let layer = ChannelLayer::uniform(n, 4, &[1, 2, 3, 4], SiteChannel::bell_measurement).unwrap();
        let out = apply_pauli_layer(&e, &layer).unwrap();
        let p = Partition::new(vec![0], vec![1, 2, 3, 4], vec![5], n).unwrap();
        assert!((pauli_cmi(&out, &p).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn layer_matches_dense() {
        let h = zoo::cluster_chain(4).unwrap();
        let e = expand_gibbs(&h, 0.5).unwrap();
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::dephasing(1, 2, 0.3).unwrap()]).unwrap();
        let a = apply_pauli_layer(&e, &layer).unwrap().to_density_matrix().unwrap();
        let b = dense::apply_layer(&dense::gibbs_state(&h, 0.5).unwrap(), &layer).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-12);
        assert_eq!(apply_pauli_layer(&e, &ChannelLayer::identity(4, 2)).unwrap(), e);
    }

    #[test]
    fn depolarized_region_is_maximally_mixed() {
        let h = zoo::cluster_chain(5).unwrap();
        let e = expand_gibbs(&h, 1.3).unwrap();
        let layer = ChannelLayer::uniform(5, 2, &[1, 2], |s| SiteChannel::complete_depolarizing(s, 2)).unwrap();
        let out = apply_pauli_layer(&e, &layer).unwrap();
        assert!(out.entries().iter().all(|&(x, z, _)| (x | z) & 0b110 == 0));
        assert!((marginal_entropy(&out, &[1, 2]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_group_rank() {
        let h = zoo::cluster_chain(5).unwrap();
        let e = expand_gibbs(&h, 1.0).unwrap();
        // Only the stabilizers fully inside {0, 1, 2} survive: K_0, K_1 and products.
        let g = restricted_group(&e, &[0, 1, 2]).unwrap();
        assert_eq!(g.rank, 2);
    }

    #[test]
    fn walsh_hadamard_small() {
        let mut a = [1.0, 2.0, 3.0, 4.0];
        walsh_hadamard(&mut a);
        assert_eq!(a, [10.0, -2.0, -4.0, 0.0]);
    }
}
