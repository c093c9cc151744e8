//! Single-site channels and layers of them.
//!
//! Conventions: transition matrices are column stochastic, `T[(out, in)]`.
//! Depolarizing is `ρ → (1-p)ρ + p Tr(ρ) I/q`, dephasing `ρ → (1-p)ρ + p ZρZ`,
//! bit flip `ρ → (1-p)ρ + p XρX`. On sites of `m > 1` qubits dephasing and
//! bit flip act independently on every qubit of the site.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LocalHamiltonian, PauliString};
use crate::Complex64;

const STOCHASTIC_TOL: f64 = 1e-12;
const KRAUS_TOL: f64 = 1e-12;
const PAULI_DIAGONAL_TOL: f64 = 1e-10;
const COMMUTATOR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelKind {
    Transition(DMatrix<f64>),
    Kraus(Vec<DMatrix<Complex64>>),
    /// Strings over the `m` qubits of the site with their probabilities.
    PauliMixture(Vec<(PauliString, f64)>),
    /// `X → Tr(X) I/q`, the channel form of a partial trace.
    CompleteDepolarizing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteChannel {
    site: usize,
    q: usize,
    kind: ChannelKind,
    label: String,
}

fn pauli_letters(m: usize) -> Result<Vec<PauliString>> {
    (0..1u64 << (2 * m))
        .map(|i| PauliString::from_bits(m, i & ((1 << m) - 1), i >> m, false))
        .collect()
}

/// Factor table indexed by `x | z << m` of a single-site Pauli.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingProfile {
    pub m: usize,
    pub factors: Vec<f64>,
}

impl DampingProfile {
    pub fn factor(&self, x: u64, z: u64) -> f64 {
        self.factors[(x | (z << self.m)) as usize]
    }
    pub fn is_identity(&self) -> bool {
        self.factors.iter().all(|&f| f == 1.0)
    }
}

impl SiteChannel {
    pub fn transition(site: usize, t: DMatrix<f64>) -> Result<Self> {
        let q = t.nrows();
        let bad = |reason: String| Error::InvalidChannel { site, reason };
        if t.ncols() != q || q < 2 {
            return Err(bad(format!("transition matrix must be q×q with q ≥ 2, got {}×{}", t.nrows(), t.ncols())));
        }
        if t.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(bad("transition entries must be nonnegative".into()));
        }
        for (j, col) in t.column_iter().enumerate() {
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(bad(format!("column {j} sums to {s}, not 1")));
            }
        }
        Ok(SiteChannel { site, q, kind: ChannelKind::Transition(t), label: "transition".into() })
    }

    pub fn kraus(site: usize, ops: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let bad = |reason: String| Error::InvalidChannel { site, reason };
        let q = ops.first().map(|k| k.nrows()).ok_or_else(|| bad("empty Kraus list".into()))?;
        if q < 2 || ops.iter().any(|k| k.nrows() != q || k.ncols() != q) {
            return Err(bad("Kraus operators must all be q×q with q ≥ 2".into()));
        }
        let mut sum = DMatrix::<Complex64>::zeros(q, q);
        for k in &ops {
            sum += k.adjoint() * k;
        }
        let dev = (sum - linalg::identity(q)).norm();
        if dev > KRAUS_TOL {
            return Err(bad(format!("Σ K†K deviates from I by {dev:e}")));
        }
        Ok(SiteChannel { site, q, kind: ChannelKind::Kraus(ops), label: "kraus".into() })
    }

    pub fn pauli_mixture(site: usize, m: usize, terms: Vec<(PauliString, f64)>) -> Result<Self> {
        let bad = |reason: String| Error::InvalidChannel { site, reason };
        if m == 0 || m > 6 {
            return Err(bad(format!("Pauli mixtures need 1..=6 qubits per site, got {m}")));
        }
        if terms.iter().any(|(p, w)| p.num_qubits() != m || !(*w >= 0.0)) {
            return Err(bad("mixture strings must act on the site's qubits with nonnegative weight".into()));
        }
        let s: f64 = terms.iter().map(|(_, w)| w).sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(bad(format!("mixture probabilities sum to {s}")));
        }
        Ok(SiteChannel { site, q: 1 << m, kind: ChannelKind::PauliMixture(terms), label: "pauli_mixture".into() })
    }

    pub fn complete_depolarizing(site: usize, q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidChannel { site, reason: "q must be at least 2".into() });
        }
        Ok(SiteChannel { site, q, kind: ChannelKind::CompleteDepolarizing, label: "trace".into() })
    }

    fn check_probability(site: usize, p: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidChannel { site, reason: format!("probability {p} outside [0, 1]") });
        }
        Ok(())
    }

    fn qubits_of(site: usize, q: usize) -> Result<usize> {
        if !q.is_power_of_two() {
            return Err(Error::InvalidChannel { site, reason: format!("q = {q} is not a power of two") });
        }
        Ok(q.trailing_zeros() as usize)
    }

    /// Independent single-qubit mixtures `(1-p) I + p P` on every qubit of the site.
    fn per_qubit(site: usize, q: usize, p: f64, letter: char, name: &str) -> Result<Self> {
        Self::check_probability(site, p)?;
        let m = Self::qubits_of(site, q)?;
        let mut terms = vec![(PauliString::identity(m)?, 1.0)];
        for k in 0..m {
            let flip = PauliString::single(m, k, letter)?;
            let mut next = Vec::with_capacity(terms.len() * 2);
            for (s, w) in &terms {
                next.push((*s, w * (1.0 - p)));
                next.push((s.mul_phase(&flip).1, w * p));
            }
            terms = next;
        }
        terms.retain(|(_, w)| *w > 0.0);
        let mut c = Self::pauli_mixture(site, m, terms)?;
        c.label = format!("{name}(p={p})");
        Ok(c)
    }

    pub fn dephasing(site: usize, q: usize, p: f64) -> Result<Self> {
        Self::per_qubit(site, q, p, 'Z', "dephasing")
    }

    pub fn bitflip(site: usize, q: usize, p: f64) -> Result<Self> {
        Self::per_qubit(site, q, p, 'X', "bitflip")
    }

    pub fn depolarizing(site: usize, q: usize, p: f64) -> Result<Self> {
        Self::check_probability(site, p)?;
        let mut c = if q.is_power_of_two() {
            let m = q.trailing_zeros() as usize;
            let each = p / (q * q) as f64;
            let terms = pauli_letters(m)?
                .into_iter()
                .map(|s| {
                    let w = if s.is_identity() { 1.0 - p + each } else { each };
                    (s, w)
                })
                .collect();
            Self::pauli_mixture(site, m, terms)?
        } else {
            let mut ops = vec![linalg::identity(q) * Complex64::new((1.0 - p).sqrt(), 0.0)];
            let amp = Complex64::new((p / q as f64).sqrt(), 0.0);
            for i in 0..q {
                for j in 0..q {
                    let mut k = DMatrix::zeros(q, q);
                    k[(i, j)] = amp;
                    ops.push(k);
                }
            }
            Self::kraus(site, ops)?
        };
        c.label = format!("depolarizing(p={p})");
        Ok(c)
    }

    pub fn amplitude_damping(site: usize, gamma: f64) -> Result<Self> {
        Self::check_probability(site, gamma)?;
        let z = Complex64::zero();
        let one = Complex64::new(1.0, 0.0);
        let k0 = DMatrix::from_row_slice(2, 2, &[one, z, z, Complex64::new((1.0 - gamma).sqrt(), 0.0)]);
        let k1 = DMatrix::from_row_slice(2, 2, &[z, Complex64::new(gamma.sqrt(), 0.0), z, z]);
        let mut c = Self::kraus(site, vec![k0, k1])?;
        c.label = format!("amplitude_damping(gamma={gamma})");
        Ok(c)
    }

    /// Two-bit site mapped to the parity of its bits (output digit 0 or 1).
    pub fn parity(site: usize) -> Result<Self> {
        let mut t = DMatrix::zeros(4, 4);
        for input in 0..4usize {
            t[((input >> 1) ^ (input & 1), input)] = 1.0;
        }
        let mut c = Self::transition(site, t)?;
        c.label = "parity".into();
        Ok(c)
    }

    /// Two-qubit site dephased in the Bell basis: the averaged channel of
    /// measuring `XX` and `ZZ`.
    pub fn bell_measurement(site: usize) -> Result<Self> {
        let terms = ["II", "XX", "YY", "ZZ"]
            .iter()
            .map(|s| Ok((s.parse::<PauliString>()?, 0.25)))
            .collect::<Result<Vec<_>>>()?;
        let mut c = Self::pauli_mixture(site, 2, terms)?;
        c.label = "bell_measurement".into();
        Ok(c)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
    pub fn site(&self) -> usize {
        self.site
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn kind(&self) -> &ChannelKind {
        &self.kind
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn at_site(&self, site: usize) -> Self {
        SiteChannel { site, ..self.clone() }
    }

    pub fn is_unital(&self) -> bool {
        match &self.kind {
            ChannelKind::Transition(t) => t
                .row_iter()
                .all(|r| (r.iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL),
            ChannelKind::Kraus(ops) => {
                let mut sum = DMatrix::<Complex64>::zeros(self.q, self.q);
                for k in ops {
                    sum += k * k.adjoint();
                }
                (sum - linalg::identity(self.q)).norm() <= KRAUS_TOL
            }
            ChannelKind::PauliMixture(_) | ChannelKind::CompleteDepolarizing => true,
        }
    }

    /// Kraus operators; transition matrices are embedded as `√T[j,i] |j⟩⟨i|`.
    pub fn kraus_operators(&self) -> Vec<DMatrix<Complex64>> {
        let q = self.q;
        match &self.kind {
            ChannelKind::Kraus(ops) => ops.clone(),
            ChannelKind::PauliMixture(terms) => terms
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(p, w)| p.to_dense() * Complex64::new(w.sqrt(), 0.0))
                .collect(),
            ChannelKind::Transition(t) => {
                let mut ops = Vec::new();
                for j in 0..q {
                    for i in 0..q {
                        if t[(j, i)] > 0.0 {
                            let mut k = DMatrix::zeros(q, q);
                            k[(j, i)] = Complex64::new(t[(j, i)].sqrt(), 0.0);
                            ops.push(k);
                        }
                    }
                }
                ops
            }
            ChannelKind::CompleteDepolarizing => {
                let amp = Complex64::new((1.0 / q as f64).sqrt(), 0.0);
                let mut ops = Vec::with_capacity(q * q);
                for j in 0..q {
                    for i in 0..q {
                        let mut k = DMatrix::zeros(q, q);
                        k[(j, i)] = amp;
                        ops.push(k);
                    }
                }
                ops
            }
        }
    }

    /// Applies the channel to a local `q×q` matrix.
    pub fn apply_local(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        match &self.kind {
            ChannelKind::CompleteDepolarizing => {
                linalg::identity(self.q) * (linalg::trace(m) / self.q as f64)
            }
            _ => {
                let mut out = DMatrix::zeros(self.q, self.q);
                for k in self.kraus_operators() {
                    out += &k * m * k.adjoint();
                }
                out
            }
        }
    }

    /// Classical action on diagonal states, if the channel maps diagonal
    /// matrices to diagonal matrices.
    pub fn transition_matrix(&self) -> Option<DMatrix<f64>> {
        let q = self.q;
        match &self.kind {
            ChannelKind::Transition(t) => Some(t.clone()),
            ChannelKind::CompleteDepolarizing => Some(DMatrix::from_element(q, q, 1.0 / q as f64)),
            _ => {
                let mut t = DMatrix::zeros(q, q);
                for i in 0..q {
                    let mut e = DMatrix::zeros(q, q);
                    e[(i, i)] = Complex64::new(1.0, 0.0);
                    let out = self.apply_local(&e);
                    for r in 0..q {
                        for c in 0..q {
                            if r != c && out[(r, c)].norm() > PAULI_DIAGONAL_TOL {
                                return None;
                            }
                        }
                        t[(r, i)] = out[(r, r)].re;
                    }
                }
                Some(t)
            }
        }
    }

    /// `f(P)` with `E[P] = f(P) P` for every single-site Pauli `P`.
    pub fn pauli_damping_profile(&self) -> Result<DampingProfile> {
        let m = Self::qubits_of(self.site, self.q).map_err(|_| Error::NotPauliDiagonal(self.site))?;
        let letters = pauli_letters(m)?;
        let factors = match &self.kind {
            ChannelKind::PauliMixture(terms) => letters
                .iter()
                .map(|p| terms.iter().map(|(k, w)| if k.commutes_with(p) { *w } else { -*w }).sum())
                .collect(),
            ChannelKind::CompleteDepolarizing => {
                letters.iter().map(|p| if p.is_identity() { 1.0 } else { 0.0 }).collect()
            }
            _ => {
                let mut f = Vec::with_capacity(letters.len());
                for p in &letters {
                    let pd = p.to_dense();
                    let img = self.apply_local(&pd);
                    let v = (linalg::trace(&(&pd * &img)) / self.q as f64).re;
                    if (img - pd * Complex64::new(v, 0.0)).norm() > PAULI_DIAGONAL_TOL {
                        return Err(Error::NotPauliDiagonal(self.site));
                    }
                    f.push(v);
                }
                f
            }
        };
        Ok(DampingProfile { m, factors })
    }
}

/// `then ∘ first` on the same site.
pub fn compose(first: &SiteChannel, then: &SiteChannel) -> Result<SiteChannel> {
    if first.q != then.q {
        return Err(Error::InvalidChannel { site: first.site, reason: "composed channels differ in q".into() });
    }
    let site = first.site;
    let label = format!("{}∘{}", then.label, first.label);
    let composed = match (&first.kind, &then.kind) {
        (_, ChannelKind::CompleteDepolarizing) => SiteChannel::complete_depolarizing(site, first.q)?,
        (ChannelKind::Transition(a), ChannelKind::Transition(b)) => SiteChannel::transition(site, b * a)?,
        (ChannelKind::PauliMixture(a), ChannelKind::PauliMixture(b)) => {
            let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
            for (pa, wa) in a {
                for (pb, wb) in b {
                    let (_, p) = pa.mul_phase(pb);
                    *acc.entry((p.x_bits(), p.z_bits())).or_insert(0.0) += wa * wb;
                }
            }
            let m = first.q.trailing_zeros() as usize;
            let terms = acc
                .into_iter()
                .map(|((x, z), w)| Ok((PauliString::from_bits(m, x, z, false)?, w)))
                .collect::<Result<Vec<_>>>()?;
            SiteChannel::pauli_mixture(site, m, terms)?
        }
        _ => {
            let mut ops = Vec::new();
            for kb in then.kraus_operators() {
                for ka in first.kraus_operators() {
                    let k = &kb * ka;
                    if k.norm() > 0.0 {
                        ops.push(k);
                    }
                }
            }
            SiteChannel::kraus(site, ops)?
        }
    };
    Ok(composed.with_label(label))
}

/// Tensor product of single-site channels; absent sites carry the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLayer {
    n_sites: usize,
    q: usize,
    channels: BTreeMap<usize, SiteChannel>,
    region: Vec<usize>,
}

impl ChannelLayer {
    pub fn identity(n_sites: usize, q: usize) -> Self {
        ChannelLayer { n_sites, q, channels: BTreeMap::new(), region: Vec::new() }
    }

    /// Layer from site channels; later channels on the same site are composed after earlier ones.
    pub fn new(n_sites: usize, q: usize, channels: Vec<SiteChannel>) -> Result<Self> {
        let mut layer = Self::identity(n_sites, q);
        for c in channels {
            layer.push(c)?;
        }
        Ok(layer)
    }

    /// The same channel on every listed site.
    pub fn uniform(n_sites: usize, q: usize, sites: &[usize], make: impl Fn(usize) -> Result<SiteChannel>) -> Result<Self> {
        Self::new(n_sites, q, sites.iter().map(|&s| make(s)).collect::<Result<Vec<_>>>()?)
    }

    pub fn push(&mut self, c: SiteChannel) -> Result<()> {
        if c.site >= self.n_sites {
            return Err(Error::InvalidChannel { site: c.site, reason: format!("site outside 0..{}", self.n_sites) });
        }
        if c.q != self.q {
            return Err(Error::InvalidChannel {
                site: c.site,
                reason: format!("channel dimension {} differs from model q = {}", c.q, self.q),
            });
        }
        let site = c.site;
        let merged = match self.channels.remove(&site) {
            Some(prev) => compose(&prev, &c)?,
            None => c,
        };
        self.channels.insert(site, merged);
        if let Err(pos) = self.region.binary_search(&site) {
            self.region.insert(pos, site);
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn region(&self) -> &[usize] {
        &self.region
    }
    pub fn get(&self, site: usize) -> Option<&SiteChannel> {
        self.channels.get(&site)
    }
    pub fn iter(&self) -> impl Iterator<Item = &SiteChannel> {
        self.channels.values()
    }
    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }
    pub fn is_unital(&self) -> bool {
        self.channels.values().all(SiteChannel::is_unital)
    }

    /// Complete depolarization composed after the existing channel on every traced site.
    pub fn compose_with_trace(&self, traced: &[usize]) -> Result<ChannelLayer> {
        let mut out = self.clone();
        for &s in traced {
            out.push(SiteChannel::complete_depolarizing(s, self.q)?)?;
        }
        Ok(out)
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &ChannelLayer) -> Result<ChannelLayer> {
        let mut out = self.clone();
        for c in other.iter() {
            out.push(c.clone())?;
        }
        Ok(out)
    }

    pub fn describe(&self) -> String {
        if self.channels.is_empty() {
            return "identity".into();
        }
        self.channels.values().map(|c| format!("{}@{}", c.label, c.site)).collect::<Vec<_>>().join(",")
    }
}

/// Outcome of the commutation-preservation falsifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum CommutationCheck {
    Preserving,
    Violated { subset: Vec<usize>, mu_m: Vec<u32>, mu_n: Vec<u32>, commutator_norm: f64 },
    InconclusiveWithinCap { reason: String },
}

/// Rough flop budget for the brute-force check.
const CHECK_BUDGET: f64 = 4e9;

pub fn default_subset_cap(n_sites: usize) -> usize {
    if n_sites <= 6 {
        n_sites
    } else {
        3
    }
}

/// Searches for `O_m, O_n` products of terms and a site subset `S` such that
/// `E_S[O_m]` and `E_S[O_n]` fail to commute. Pauli multiplicities are taken
/// mod 2; other terms use multiplicities up to `multiplicity_cap`.
pub fn is_commutation_preserving(
    layer: &ChannelLayer,
    h: &LocalHamiltonian,
    subset_cap: usize,
    multiplicity_cap: u32,
) -> Result<CommutationCheck> {
    if !h.is_commuting() {
        return Err(Error::NonCommuting);
    }
    if subset_cap == 0 || multiplicity_cap == 0 {
        return Err(Error::InvalidChannel { site: 0, reason: "caps must be at least 1".into() });
    }
    let q = h.q();
    let mut sites: Vec<usize> = h.terms().iter().flat_map(|t| t.support.iter().copied()).collect();
    sites.extend(layer.region().iter().copied());
    sites.sort_unstable();
    sites.dedup();
    let k = sites.len();
    let dim = match q.checked_pow(k as u32) {
        Some(d) if d <= 256 => d,
        _ => {
            return Ok(CommutationCheck::InconclusiveWithinCap {
                reason: format!("joint support of {k} sites is too large for dense checking"),
            })
        }
    };
    let caps: Vec<u32> = h.terms().iter().map(|t| if t.as_pauli().is_some() { 1 } else { multiplicity_cap }).collect();
    let n_products: f64 = caps.iter().map(|&c| (c + 1) as f64).product();
    let chan_sites: Vec<usize> = layer.region().to_vec();
    let n_subsets: f64 = (0..=subset_cap.min(chan_sites.len()))
        .map(|s| binomial_f64(chan_sites.len(), s))
        .sum();
    let d3 = (dim as f64).powi(3);
    let work = n_subsets * (n_products * d3 + n_products * n_products * d3);
    if work > CHECK_BUDGET {
        return Ok(CommutationCheck::InconclusiveWithinCap {
            reason: format!("{n_products} products × {n_subsets} subsets exceeds the work budget"),
        });
    }

    let term_mats = h
        .terms()
        .iter()
        .map(|t| t.matrix_on(&sites, q))
        .collect::<Result<Vec<_>>>()?;
    let mut products: Vec<(Vec<u32>, DMatrix<Complex64>)> = vec![(Vec::new(), linalg::identity(dim))];
    for (a, tm) in term_mats.iter().enumerate() {
        let mut next = Vec::with_capacity(products.len() * (caps[a] as usize + 1));
        for (mu, m) in &products {
            let mut cur = m.clone();
            for e in 0..=caps[a] {
                let mut mu2 = mu.clone();
                mu2.push(e);
                next.push((mu2, cur.clone()));
                if e < caps[a] {
                    cur = &cur * tm;
                }
            }
        }
        products = next;
    }

    let positions: BTreeMap<usize, usize> = sites.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    for size in 0..=subset_cap.min(chan_sites.len()) {
        for subset in combinations(&chan_sites, size) {
            let images: Vec<DMatrix<Complex64>> = products
                .iter()
                .map(|(_, m)| {
                    let mut img = m.clone();
                    for s in &subset {
                        let c = layer.get(*s).expect("subset drawn from channel sites");
                        img = apply_site_channel_dense(&img, c, positions[s], k, q);
                    }
                    img
                })
                .collect();
            for i in 0..images.len() {
                for j in i + 1..images.len() {
                    let comm = &images[i] * &images[j] - &images[j] * &images[i];
                    let norm = linalg::operator_norm(&comm);
                    if norm > COMMUTATOR_TOL {
                        return Ok(CommutationCheck::Violated {
                            subset,
                            mu_m: products[i].0.clone(),
                            mu_n: products[j].0.clone(),
                            commutator_norm: norm,
                        });
                    }
                }
            }
        }
    }
    Ok(CommutationCheck::Preserving)
}

/// Applies one site channel to a dense matrix on `n` digits of dimension `q`.
pub(crate) fn apply_site_channel_dense(
    m: &DMatrix<Complex64>,
    c: &SiteChannel,
    pos: usize,
    n: usize,
    q: usize,
) -> DMatrix<Complex64> {
    match c.kind() {
        ChannelKind::CompleteDepolarizing => linalg::depolarize_digit(m, pos, n, q),
        _ => linalg::apply_kraus(m, &c.kraus_operators(), &[pos], n, q),
    }
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All `k`-subsets of `items` in lexicographic order.
pub fn combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    fn rec<T: Copy>(items: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}
