//! Exact enumeration over classical configurations.
//!
//! Configurations are indexed lexicographically with site 0 most significant.
//! Entropies are accumulated in nats and reported in bits.

use serde::Serialize;

use crate::caps::{self, Caps};
use crate::channels::ChannelLayer;
use crate::error::{Error, Result};
use crate::linalg::{local_layout, stride};
use crate::model::{index_to_digits, HamiltonianTerm, LocalHamiltonian, Partition};
use crate::LN2;

const NORMALIZATION_TOL: f64 = 1e-12;
const ZERO_OUTCOME: f64 = 1e-15;
const SSA_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    n: usize,
    q: usize,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(n: usize, q: usize, probs: Vec<f64>) -> Result<Self> {
        let dim = q.checked_pow(n as u32).ok_or(Error::CapExceeded {
            what: "classical states",
            value: usize::MAX,
            cap: Caps::get().classical_states,
        })?;
        if probs.len() != dim {
            return Err(Error::Consistency(format!("{} probabilities for {dim} configurations", probs.len())));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Consistency("negative or NaN probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Consistency(format!("probabilities sum to {s}")));
        }
        Ok(Distribution { n, q, probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(n: usize, q: usize, mut w: Vec<f64>) -> Result<Self> {
        let s: f64 = w.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Consistency(format!("weights sum to {s}")));
        }
        w.iter_mut().for_each(|p| *p /= s);
        Distribution::new(n, q, w)
    }

    pub fn uniform(n: usize, q: usize) -> Result<Self> {
        let dim = checked_dim(n, q)?;
        Distribution::new(n, q, vec![1.0 / dim as f64; dim])
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal on the sorted site list `region`.
    pub fn marginal(&self, region: &[usize]) -> Vec<f64> {
        let layout = local_layout(self.n, self.q, region);
        let mut out = vec![0.0; layout.offsets.len()];
        for &base in &layout.bases {
            for (l, o) in out.iter_mut().zip(&layout.offsets) {
                *l += self.probs[base + o];
            }
        }
        out
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

fn checked_dim(n: usize, q: usize) -> Result<usize> {
    let cap = Caps::get().classical_states;
    let dim = q.checked_pow(n as u32).ok_or(Error::CapExceeded { what: "classical states", value: usize::MAX, cap })?;
    caps::check("classical states", dim, cap)?;
    Ok(dim)
}

/// Diagonal values of a term over its support configurations.
pub fn term_table(t: &HamiltonianTerm, q: usize) -> Result<Vec<f64>> {
    if !t.is_diagonal() {
        return Err(Error::NonDiagonalTerm(t.index));
    }
    let k = t.support.len();
    let mut digits = vec![0usize; k];
    let mut config = vec![0usize; t.support.iter().max().map_or(0, |m| m + 1)];
    (0..q.pow(k as u32))
        .map(|l| {
            index_to_digits(l, q, &mut digits);
            for (&s, &d) in t.support.iter().zip(&digits) {
                config[s] = d;
            }
            t.diagonal_value(&config, q)
        })
        .collect()
}

/// Energies `Σ_a λ_a h_a(x)` for every configuration.
pub fn energies(h: &LocalHamiltonian) -> Result<Vec<f64>> {
    let (n, q) = (h.n_sites(), h.q());
    let dim = checked_dim(n, q)?;
    let mut e = vec![0.0; dim];
    for t in h.terms() {
        let table = term_table(t, q)?;
        let layout = local_layout(n, q, &t.support);
        for &base in &layout.bases {
            for (l, &o) in layout.offsets.iter().enumerate() {
                e[base + o] += t.lambda * table[l];
            }
        }
    }
    Ok(e)
}

/// `p(x) ∝ exp(-β E(x))`; `β = ∞` gives the uniform distribution on ground states.
pub fn gibbs_distribution(h: &LocalHamiltonian, beta: f64) -> Result<Distribution> {
    if !(beta >= 0.0) {
        return Err(Error::Config(format!("beta = {beta} must be nonnegative")));
    }
    let e = energies(h)?;
    let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = if beta.is_infinite() {
        e.iter().map(|&x| if x - e_min <= 1e-12 { 1.0 } else { 0.0 }).collect()
    } else {
        e.iter().map(|&x| (-beta * (x - e_min)).exp()).collect()
    };
    Distribution::from_weights(h.n_sites(), h.q(), w)
}

/// Applies the column-stochastic matrix `t` along the axis of `site`.
fn apply_site_transition(probs: &[f64], t: &nalgebra::DMatrix<f64>, site: usize, n: usize, q: usize) -> Vec<f64> {
    let layout = local_layout(n, q, &[site]);
    let mut out = vec![0.0; probs.len()];
    for &base in &layout.bases {
        for i in 0..q {
            let p = probs[base + layout.offsets[i]];
            if p == 0.0 {
                continue;
            }
            for o in 0..q {
                out[base + layout.offsets[o]] += t[(o, i)] * p;
            }
        }
    }
    out
}

pub fn apply_transitions(d: &Distribution, layer: &ChannelLayer) -> Result<Distribution> {
    if layer.n_sites() != d.n || layer.q() != d.q {
        return Err(Error::Consistency("layer and distribution disagree on sites or q".into()));
    }
    let mut probs = d.probs.clone();
    for c in layer.iter() {
        let t = c.transition_matrix().ok_or(Error::NonClassicalChannel(c.site()))?;
        probs = apply_site_transition(&probs, &t, c.site(), d.n, d.q);
    }
    Distribution::from_weights(d.n, d.q, probs)
}

fn entropy_nats(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

pub fn shannon_entropy(d: &Distribution, region: &[usize]) -> f64 {
    let mut r = region.to_vec();
    r.sort_unstable();
    r.dedup();
    entropy_nats(&d.marginal(&r)) / LN2
}

/// `I(A:C|B)` in bits before clamping, computed as
/// `Σ p(abc) log[p(abc) p(b) / (p(ab) p(bc))]`.
pub fn cmi_raw(d: &Distribution, p: &Partition) -> f64 {
    let abc = p.abc();
    let joint = d.marginal(&abc);
    let k = abc.len();
    let q = d.q;
    let pos = |set: &[usize]| -> Vec<usize> { set.iter().map(|s| abc.binary_search(s).unwrap()).collect() };
    let pb = pos(p.b());
    let ab = pos(&p.ab());
    let bc = pos(&p.bc());
    let sub = Distribution { n: k, q, probs: joint.clone() };
    let m_ab = sub.marginal(&ab);
    let m_bc = sub.marginal(&bc);
    let m_b = sub.marginal(&pb);
    let idx = |digits: &[usize], set: &[usize]| set.iter().fold(0usize, |acc, &s| acc * q + digits[s]);
    let mut digits = vec![0usize; k];
    let mut acc = 0.0;
    for (i, &pabc) in joint.iter().enumerate() {
        if pabc <= 0.0 {
            continue;
        }
        index_to_digits(i, q, &mut digits);
        let r = (pabc * m_b[idx(&digits, &pb)]) / (m_ab[idx(&digits, &ab)] * m_bc[idx(&digits, &bc)]);
        acc += pabc * r.ln();
    }
    acc / LN2
}

/// CMI in bits; tiny negative round-off (above `-1e-10`) is reported as 0.
pub fn cmi(d: &Distribution, p: &Partition) -> Result<f64> {
    let raw = cmi_raw(d, p);
    if raw < -SSA_SLACK {
        return Err(Error::Consistency(format!("classical CMI {raw:e} is negative")));
    }
    Ok(raw.max(0.0))
}

/// `H(AB) + H(BC) - H(B) - H(ABC)` from four separate marginal entropies.
pub fn cmi_from_entropies(d: &Distribution, p: &Partition) -> f64 {
    let [ab, bc, b, abc] = p.regions();
    shannon_entropy(d, &ab) + shannon_entropy(d, &bc) - shannon_entropy(d, &b) - shannon_entropy(d, &abc)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PostSelected {
    pub outcome: Vec<usize>,
    pub probability: f64,
    pub mutual_information: f64,
}

/// Per outcome `y` on B: `(P(B = y), I(A:C | B = y))`.
pub fn post_select_decompose(d: &Distribution, p: &Partition) -> Result<Vec<PostSelected>> {
    if p.b().is_empty() {
        return Err(Error::InvalidPartition("post-selection needs a nonempty B".into()));
    }
    let q = d.q;
    let abc = p.abc();
    let sub = Distribution { n: abc.len(), q, probs: d.marginal(&abc) };
    let pos = |set: &[usize]| -> Vec<usize> { set.iter().map(|s| abc.binary_search(s).unwrap()).collect() };
    let (pa, pb, pc) = (pos(p.a()), pos(p.b()), pos(p.c()));
    let layout = local_layout(abc.len(), q, &pb);
    let n_a = q.pow(pa.len() as u32);
    let n_c = q.pow(pc.len() as u32);
    let mut a_c: Vec<usize> = [pa.clone(), pc.clone()].concat();
    a_c.sort_unstable();
    let mut out = Vec::new();
    let mut digits = vec![0usize; pb.len()];
    for (y, &offset) in layout.offsets.iter().enumerate() {
        let probs: Vec<f64> = layout.bases.iter().map(|&b| sub.probs[b + offset]).collect();
        let py: f64 = probs.iter().sum();
        index_to_digits(y, q, &mut digits);
        if py < ZERO_OUTCOME {
            continue;
        }
        // `bases` enumerate the A∪C digits in lexicographic order of `a_c`.
        let cond = Distribution { n: a_c.len(), q, probs: probs.iter().map(|v| v / py).collect() };
        let ra: Vec<usize> = pa.iter().map(|s| a_c.binary_search(s).unwrap()).collect();
        let rc: Vec<usize> = pc.iter().map(|s| a_c.binary_search(s).unwrap()).collect();
        let ma = cond.marginal(&ra);
        let mc = cond.marginal(&rc);
        debug_assert_eq!(ma.len(), n_a);
        debug_assert_eq!(mc.len(), n_c);
        let mi = (entropy_nats(&ma) + entropy_nats(&mc) - entropy_nats(&cond.probs)) / LN2;
        out.push(PostSelected { outcome: digits.clone(), probability: py, mutual_information: mi });
    }
    Ok(out)
}

/// `H^{(y)} = βH + Σ_{i∈Y} d^{(i)}` with `exp(-d^{(i)}(y')) = T_i(y_i, y')`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinnedHamiltonian {
    pub beta: f64,
    pub y_sites: Vec<usize>,
    pub outcome: Vec<usize>,
    /// `d^{(i)}(y')` for each pinned site, indexed by `y'`.
    pub pinning: Vec<Vec<f64>>,
    /// `Z_i = Σ_{y'} exp(-d^{(i)}(y'))`.
    pub normalizers: Vec<f64>,
    #[serde(skip)]
    base: LocalHamiltonian,
}

impl PinnedHamiltonian {
    pub fn base(&self) -> &LocalHamiltonian {
        &self.base
    }

    pub fn z0(&self) -> f64 {
        self.normalizers.iter().product()
    }

    /// `exp(-d^{(i)}(y'))`, the pinning weight of site `y_sites[j]`.
    pub fn pinning_weights(&self, j: usize) -> Vec<f64> {
        self.pinning[j].iter().map(|d| (-d).exp()).collect()
    }

    /// `exp(-H^{(y)})` normalized over all sites.
    pub fn gibbs(&self) -> Result<Distribution> {
        let (n, q) = (self.base.n_sites(), self.base.q());
        let e = energies(&self.base)?;
        let e_min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut w: Vec<f64> = e.iter().map(|&x| (-self.beta * (x - e_min)).exp()).collect();
        for (j, &s) in self.y_sites.iter().enumerate() {
            let pw = self.pinning_weights(j);
            let st = stride(n, q, s);
            for (i, wi) in w.iter_mut().enumerate() {
                *wi *= pw[(i / st) % q];
            }
        }
        Distribution::from_weights(n, q, w)
    }

    /// Marginal of `exp(-H^{(y)})` on the unpinned sites, traced over Y.
    pub fn marginal_off_y(&self) -> Result<Distribution> {
        let keep = complement(self.base.n_sites(), &self.y_sites);
        let g = self.gibbs()?;
        Distribution::from_weights(keep.len(), g.q, g.marginal(&keep))
    }
}

pub fn complement(n: usize, sites: &[usize]) -> Vec<usize> {
    (0..n).filter(|s| !sites.contains(s)).collect()
}

/// Pins the outcome `y` (one digit per site of `layer.region()`, ascending).
pub fn pinned_hamiltonian(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, y: &[usize]) -> Result<PinnedHamiltonian> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Config(format!("pinned Hamiltonians need finite beta >= 0, got {beta}")));
    }
    if !h.is_diagonal() {
        let t = h.terms().iter().find(|t| !t.is_diagonal()).unwrap();
        return Err(Error::NonDiagonalTerm(t.index));
    }
    let y_sites = layer.region().to_vec();
    if y.len() != y_sites.len() || y.iter().any(|&v| v >= h.q()) {
        return Err(Error::Config("outcome must give one valid digit per channel site".into()));
    }
    let mut pinning = Vec::with_capacity(y_sites.len());
    let mut normalizers = Vec::with_capacity(y_sites.len());
    for (&s, &ys) in y_sites.iter().zip(y) {
        let c = layer.get(s).expect("region lists channel sites");
        let t = c.transition_matrix().ok_or(Error::NonClassicalChannel(s))?;
        if let Some(input) = (0..h.q()).find(|&i| t[(ys, i)] <= 0.0) {
            return Err(Error::ZeroTransitionEntry { site: s, out: ys, input });
        }
        let row: Vec<f64> = (0..h.q()).map(|i| t[(ys, i)]).collect();
        normalizers.push(row.iter().sum());
        pinning.push(row.iter().map(|v| -v.ln()).collect());
    }
    Ok(PinnedHamiltonian { beta, y_sites, outcome: y.to_vec(), pinning, normalizers, base: h.clone() })
}

/// `P(non-Y sites | T[Y] = y)` obtained by applying the layer and conditioning.
pub fn postselected_conditional(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, y: &[usize]) -> Result<Distribution> {
    let d = apply_transitions(&gibbs_distribution(h, beta)?, layer)?;
    let (n, q) = (h.n_sites(), h.q());
    let y_sites = layer.region();
    let keep = complement(n, y_sites);
    let mut w = vec![0.0; q.pow(keep.len() as u32)];
    let mut digits = vec![0usize; n];
    for (i, &p) in d.probs.iter().enumerate() {
        index_to_digits(i, q, &mut digits);
        if y_sites.iter().zip(y).all(|(&s, &v)| digits[s] == v) {
            let k = keep.iter().fold(0usize, |acc, &s| acc * q + digits[s]);
            w[k] += p;
        }
    }
    Distribution::from_weights(keep.len(), q, w)
}

/// Every outcome configuration on `n_y` sites.
pub fn all_outcomes(n_y: usize, q: usize) -> Vec<Vec<usize>> {
    let mut digits = vec![0usize; n_y];
    (0..q.pow(n_y as u32))
        .map(|i| {
            index_to_digits(i, q, &mut digits);
            digits.clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::SiteChannel;
    use crate::model::zoo;
    use crate::Complex64;
    use nalgebra::DMatrix;

    #[test]
    fn beta_zero_is_uniform() {
        let h = zoo::ising_chain(4, -1.0).unwrap();
        let d = gibbs_distribution(&h, 0.0).unwrap();
        assert!(d.probs().iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15));
        assert!((shannon_entropy(&d, &[0, 1, 2]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn large_beta_concentrates_on_aligned_pair() {
        let h = zoo::ising_chain(2, -1.0).unwrap();
        let d = gibbs_distribution(&h, 40.0).unwrap();
        assert!((d.probs()[0] - 0.5).abs() < 1e-12 && (d.probs()[3] - 0.5).abs() < 1e-12);
        let d = gibbs_distribution(&h, f64::INFINITY).unwrap();
        assert_eq!(d.probs(), &[0.5, 0.0, 0.0, 0.5]);
        assert_eq!(shannon_entropy(&d, &[0, 1]), 1.0);
    }

    #[test]
    fn gibbs_matches_direct_sum_oracle() {
        let h = zoo::ising_chain(6, -1.0).unwrap();
        let beta = 0.3;
        let d = gibbs_distribution(&h, beta).unwrap();
        let w: Vec<f64> = (0..64usize)
            .map(|x| {
                let spin = |i: usize| if (x >> (5 - i)) & 1 == 0 { 1.0 } else { -1.0 };
                let e: f64 = (0..5).map(|i| -spin(i) * spin(i + 1)).sum();
                (-beta * e).exp()
            })
            .collect();
        let z: f64 = w.iter().sum();
        for (p, wi) in d.probs().iter().zip(&w) {
            assert!((p - wi / z).abs() < 1e-14);
        }
    }

    #[test]
    fn bitflip_damps_correlation() {
        // correlated pair p(00) = p(11) = 0.4, p(01) = p(10) = 0.1
        let d = Distribution::new(2, 2, vec![0.4, 0.1, 0.1, 0.4]).unwrap();
        let layer = ChannelLayer::new(2, 2, vec![SiteChannel::bitflip(1, 2, 0.1).unwrap()]).unwrap();
        let out = apply_transitions(&d, &layer).unwrap();
        let corr = |p: &[f64]| p[0] - p[1] - p[2] + p[3];
        assert!((corr(out.probs()) - 0.8 * corr(d.probs())).abs() < 1e-15);
        assert_eq!(out.marginal(&[0]), d.marginal(&[0]));
        assert!((out.marginal(&[1])[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn non_classical_channel_rejected() {
        let d = Distribution::uniform(1, 2).unwrap();
        let c = Complex64::new(0.5f64.sqrt(), 0.0);
        let hadamard = DMatrix::from_row_slice(2, 2, &[c, c, c, -c]);
        let layer = ChannelLayer::new(1, 2, vec![SiteChannel::kraus(0, vec![hadamard]).unwrap()]).unwrap();
        assert!(matches!(apply_transitions(&d, &layer), Err(Error::NonClassicalChannel(0))));
    }

    #[test]
    fn independent_bits_have_zero_cmi() {
        let d = Distribution::uniform(3, 2).unwrap();
        let p = Partition::new(vec![0], vec![1], vec![2], 3).unwrap();
        assert!(cmi(&d, &p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn parity_chain_has_one_bit() {
        let n = 5;
        let h = zoo::parity_chain(n).unwrap();
        let d = gibbs_distribution(&h, f64::INFINITY).unwrap();
        let layer = ChannelLayer::uniform(n, 4, &[1, 2, 3], SiteChannel::parity).unwrap();
        let out = apply_transitions(&d, &layer).unwrap();
        let p = Partition::new(vec![0], vec![1, 2, 3], vec![4], n).unwrap();
        assert!((cmi(&out, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!((cmi_from_entropies(&out, &p) - 1.0).abs() < 1e-12);
        let terms = post_select_decompose(&out, &p).unwrap();
        assert!((terms.iter().map(|t| t.probability).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(terms.iter().all(|t| (t.mutual_information - 1.0).abs() < 1e-12));
    }

    #[test]
    fn chain_without_channel_is_markov() {
        let h = zoo::ising_chain(5, -1.0).unwrap();
        let d = gibbs_distribution(&h, 0.7).unwrap();
        let p = Partition::new(vec![0], vec![2], vec![4], 5).unwrap();
        assert!(cmi_raw(&d, &p).abs() < 1e-12);
    }

    #[test]
    fn pinned_with_uniform_transition_is_unpinned() {
        let h = zoo::ising_chain(4, -1.0).unwrap();
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::transition(1, DMatrix::from_element(2, 2, 0.5)).unwrap()]).unwrap();
        let pinned = pinned_hamiltonian(&h, 0.4, &layer, &[1]).unwrap();
        let m = pinned.marginal_off_y().unwrap();
        let g = gibbs_distribution(&h, 0.4).unwrap();
        let want = g.marginal(&[0, 2, 3]);
        assert!(m.probs().iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn pinned_requires_positive_transitions() {
        let h = zoo::ising_chain(3, -1.0).unwrap();
        let layer = ChannelLayer::new(3, 2, vec![SiteChannel::transition(1, DMatrix::identity(2, 2)).unwrap()]).unwrap();
        assert!(matches!(pinned_hamiltonian(&h, 0.4, &layer, &[0]), Err(Error::ZeroTransitionEntry { .. })));
    }
}
