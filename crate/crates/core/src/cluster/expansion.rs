use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::caps::{self, Caps};
use crate::channels::{self, default_subset_cap, is_commutation_preserving, ChannelLayer, CommutationCheck, SiteChannel};
use crate::classical::{self, PinnedHamiltonian};
use crate::cluster::series::{Coefficient, Diag, Monomial, TruncatedSeries, Truncation};
use crate::cluster::{enumerate_connected_clusters, Cluster};
use crate::combinatorics::{self, ChromaticCache};
use crate::error::{Error, Result};
use crate::model::{build_dual_graph, index_to_digits, terms_touching, DualInteractionGraph, LocalHamiltonian, Partition};
use crate::Complex64;

/// Largest register dimension for dense series coefficients.
pub const SERIES_DIM_CAP: usize = 256;
/// Largest register dimension for diagonal series coefficients.
pub const DIAG_SERIES_DIM_CAP: usize = 1 << 16;
/// Coefficient norms at or below this count as zero in vanishing checks.
pub const VANISHING_TOL: f64 = 1e-9;

type Dense = DMatrix<Complex64>;

fn register_dim(q: usize, sites: &[usize], cap: usize) -> Result<usize> {
    let dim = q.checked_pow(sites.len() as u32).unwrap_or(usize::MAX);
    caps::check("series register dimension", dim, cap)?;
    Ok(dim)
}

fn check_degree(degree: usize) -> Result<()> {
    caps::check("series degree", degree, Caps::get().cluster_weight)
}

/// Sites touched by the terms of `w`, sorted.
pub fn cluster_support(h: &LocalHamiltonian, w: &Cluster) -> Vec<usize> {
    let mut sites: Vec<usize> = w.terms().flat_map(|a| h.terms()[a].support.iter().copied()).collect();
    sites.sort_unstable();
    sites.dedup();
    sites
}

fn channels_on<'a>(layer: &'a ChannelLayer, sites: &[usize]) -> Vec<(usize, &'a SiteChannel)> {
    sites.iter().enumerate().filter_map(|(pos, &s)| layer.get(s).map(|c| (pos, c))).collect()
}

fn apply_channels_dense(m: &Dense, chans: &[(usize, &SiteChannel)], k: usize, q: usize) -> Dense {
    chans.iter().fold(m.clone(), |acc, (pos, c)| channels::apply_site_channel_dense(&acc, c, *pos, k, q))
}

fn apply_channels_diag(d: &Diag, chans: &[(usize, &SiteChannel)], k: usize, q: usize) -> Result<Diag> {
    let mut v = d.0.clone();
    for &(pos, c) in chans {
        let t = c.transition_matrix().ok_or(Error::NonClassicalChannel(c.site()))?;
        let stride = q.pow((k - 1 - pos) as u32);
        let mut out = vec![0.0; v.len()];
        for (i, o) in out.iter_mut().enumerate() {
            let digit = (i / stride) % q;
            let base = i - digit * stride;
            *o = (0..q).map(|inp| t[(digit, inp)] * v[base + inp * stride]).sum();
        }
        v = out;
    }
    Ok(Diag(v))
}

/// Power coefficients `(−β h)^k / k!` for `k = 0..=max`.
fn exp_coefficients<C: Coefficient>(h: &C, beta: f64, max: u32) -> Vec<C> {
    let mut out = vec![h.identity_like()];
    let step = h.scaled(-beta);
    for k in 1..=max {
        let next = out[k as usize - 1].mul(&step).scaled(1.0 / k as f64);
        out.push(next);
    }
    out
}

/// `e^{−β Σ_a λ_a h_a}` as a series in the variables the truncation admits.
fn gibbs_series<C: Coefficient>(
    h: &LocalHamiltonian,
    beta: f64,
    trunc: &Truncation,
    identity: &C,
    term_op: impl Fn(usize) -> Result<C>,
) -> Result<TruncatedSeries<C>> {
    let vars: Vec<usize> = (0..h.terms().len()).filter(|&a| trunc.max_power(a) > 0).collect();
    if h.is_commuting() {
        let mut s = TruncatedSeries::constant(identity.clone(), trunc.clone());
        for &a in &vars {
            let coeffs = exp_coefficients(&term_op(a)?, beta, trunc.max_power(a));
            s = s.mul(&TruncatedSeries::univariate(a, coeffs, trunc.clone()));
        }
        Ok(s)
    } else {
        let mut linear = TruncatedSeries::zero(identity, trunc.clone());
        for &a in &vars {
            let op = term_op(a)?.scaled(-beta);
            linear.add_scaled(1.0, &TruncatedSeries::univariate(a, vec![identity.zeros_like(), op], trunc.clone()));
        }
        linear.exp()
    }
}

/// Dense series of `E[e^{−βH(λ)}]` on the register `sites`, which must hold
/// the support of every admitted variable.
pub fn channelled_gibbs_series_on(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    trunc: &Truncation,
    sites: &[usize],
) -> Result<TruncatedSeries<Dense>> {
    if !layer.is_unital() {
        return Err(Error::Unsupported("cluster expansion needs a unital layer".into()));
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Config(format!("series need finite beta >= 0, got {beta}")));
    }
    check_degree(trunc.degree)?;
    let q = h.q();
    let dim = register_dim(q, sites, SERIES_DIM_CAP)?;
    let id = Dense::identity(dim, dim);
    let s = gibbs_series(h, beta, trunc, &id, |a| h.terms()[a].matrix_on(sites, q))?;
    let chans = channels_on(layer, sites);
    Ok(s.map(|c| apply_channels_dense(c, &chans, sites.len(), q)))
}

/// Dense series of `E[ρ̃]` on the full register, truncated at total degree `degree`.
pub fn series_of_channelled_gibbs(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    degree: usize,
) -> Result<TruncatedSeries<Dense>> {
    let sites: Vec<usize> = (0..h.n_sites()).collect();
    channelled_gibbs_series_on(h, beta, layer, &Truncation::degree(degree), &sites)
}

/// Diagonal series of `E[e^{−βH(λ)}]` on the full register for diagonal `H`
/// and classical channels.
pub fn classical_series(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    trunc: &Truncation,
) -> Result<TruncatedSeries<Diag>> {
    check_degree(trunc.degree)?;
    let (n, q) = (h.n_sites(), h.q());
    let sites: Vec<usize> = (0..n).collect();
    let dim = register_dim(q, &sites, DIAG_SERIES_DIM_CAP)?;
    let id = Diag(vec![1.0; dim]);
    let s = gibbs_series(h, beta, trunc, &id, |a| term_diag(h, a, dim))?;
    let chans = channels_on(layer, &sites);
    s.try_map(|c| apply_channels_diag(c, &chans, n, q))
}

fn term_diag(h: &LocalHamiltonian, a: usize, dim: usize) -> Result<Diag> {
    let (n, q) = (h.n_sites(), h.q());
    let t = &h.terms()[a];
    let mut digits = vec![0usize; n];
    (0..dim)
        .map(|i| {
            index_to_digits(i, q, &mut digits);
            t.diagonal_value(&digits, q)
        })
        .collect::<Result<Vec<f64>>>()
        .map(Diag)
}

/// Series of `H(A:C|E[B]) = log E_AB + log E_BC − log E_B − log E_ABC`, each
/// region obtained by fully depolarizing its complement.
#[derive(Debug, Clone)]
pub struct CmiOperatorSeries {
    pub partition: Partition,
    pub series: TruncatedSeries<Dense>,
}

pub fn cmi_operator_series(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    p: &Partition,
    degree: usize,
) -> Result<CmiOperatorSeries> {
    let n = h.n_sites();
    let regions = p.regions();
    let logs: Vec<TruncatedSeries<Dense>> = regions
        .par_iter()
        .map(|region| {
            let traced = classical::complement(n, region);
            let l = layer.compose_with_trace(&traced)?;
            series_of_channelled_gibbs(h, beta, &l, degree)?.log()
        })
        .collect::<Result<_>>()?;
    let mut series = logs[0].clone();
    series.add_scaled(1.0, &logs[1]);
    series.add_scaled(-1.0, &logs[2]);
    series.add_scaled(-1.0, &logs[3]);
    Ok(CmiOperatorSeries { partition: p.clone(), series })
}

/// Why a monomial of the CMI-operator series is expected to vanish.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VanishingReason {
    Disconnected,
    DoesNotConnectAc,
}

#[derive(Debug, Clone, Serialize)]
pub struct VanishingEntry {
    pub cluster: Cluster,
    pub reason: VanishingReason,
    pub norm: f64,
}

impl CmiOperatorSeries {
    pub fn vanishing_reason(&self, h: &LocalHamiltonian, dual: &DualInteractionGraph, w: &Cluster) -> Option<VanishingReason> {
        if !w.is_connected(dual) {
            return Some(VanishingReason::Disconnected);
        }
        let touch_a = terms_touching(h, self.partition.a());
        let touch_c = terms_touching(h, self.partition.c());
        let connects = w.terms().any(|a| touch_a.contains(&a)) && w.terms().any(|a| touch_c.contains(&a));
        (!connects).then_some(VanishingReason::DoesNotConnectAc)
    }

    /// Every monomial expected to vanish, with its coefficient norm.
    pub fn expected_zero(&self, h: &LocalHamiltonian) -> Vec<VanishingEntry> {
        let dual = build_dual_graph(h);
        self.series
            .iter()
            .filter_map(|(m, c)| {
                let w = m.to_cluster()?;
                let reason = self.vanishing_reason(h, &dual, &w)?;
                Some(VanishingEntry { cluster: w, reason, norm: c.op_norm() })
            })
            .collect()
    }

    /// Smallest weight carrying a coefficient above the vanishing tolerance.
    pub fn lowest_nonvanishing_weight(&self) -> Option<usize> {
        self.series
            .iter()
            .filter(|(m, c)| !m.is_one() && c.op_norm() > VANISHING_TOL)
            .map(|(m, _)| m.degree())
            .min()
    }

    pub fn evaluate(&self, lambda: &[f64]) -> Dense {
        self.series.evaluate(lambda)
    }

    /// `Σ_W ‖coefficient_W‖` over monomials of weight at most `max_weight`.
    pub fn coefficient_norm_sum(&self, max_weight: usize) -> f64 {
        self.series.iter().filter(|(m, _)| m.degree() <= max_weight).map(|(_, c)| c.op_norm()).sum()
    }
}

/// `D_W E[ρ̃]` and `D_W log E[ρ̃]` on the support of `W`.
pub fn cluster_derivatives(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, w: &Cluster) -> Result<(Dense, Dense)> {
    let sites = cluster_support(h, w);
    let e = channelled_gibbs_series_on(h, beta, layer, &Truncation::dividing(w), &sites)?;
    let log = e.log()?;
    Ok((e.derivative(w)?, log.derivative(w)?))
}

/// `Σ_B c(Gra(B)) Π_{V∈B} D_V E[ρ̃]`, the reassembly of `D_W log E[ρ̃]` from
/// derivatives of connected sub-clusters. Valid when those derivatives commute.
pub fn reconstruct_log_derivative(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    w: &Cluster,
    cache: &mut ChromaticCache,
) -> Result<Dense> {
    let dual = build_dual_graph(h);
    let sites = cluster_support(h, w);
    let e = channelled_gibbs_series_on(h, beta, layer, &Truncation::dividing(w), &sites)?;
    let gra = combinatorics::interaction_graph_of_cluster(w, &dual)?;
    let nodes = w.nodes();
    let mut total = e.constant_term().zeros_like();
    for part in combinatorics::enumerate_connected_partitions(&gra)? {
        let coef = combinatorics::rational_to_f64(&cache.log_coefficient(&combinatorics::quotient_graph(&gra, &part)));
        if coef == 0.0 {
            continue;
        }
        let mut prod = e.constant_term().identity_like();
        for block in part.blocks() {
            let v = Cluster::from_terms(&block.iter().map(|&i| nodes[i]).collect::<Vec<_>>())?;
            prod = prod.mul(&e.derivative(&v)?);
        }
        total.axpy(coef, &prod);
    }
    Ok(total)
}

/// `(2e(𝔡+1)β)^{|W|+1}`.
pub fn log_derivative_bound(dual_degree: usize, beta: f64, weight: usize) -> f64 {
    (2.0 * std::f64::consts::E * (dual_degree as f64 + 1.0) * beta).powi(weight as i32 + 1)
}

fn within(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + 1e-9) + 1e-12
}

#[derive(Debug, Clone, Serialize)]
pub struct ClusterCertificate {
    #[serde(flatten)]
    pub cluster: Cluster,
    /// `(1/W!) ‖D_W log E[ρ̃]‖`.
    pub norm: f64,
    /// `(2e(𝔡+1)β)^{|W|+1}`.
    pub bound: f64,
    /// `‖D_W E[ρ̃]‖`, compared against `β^{|W|}`.
    pub connected_norm: f64,
    pub connected_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub beta: f64,
    pub dual_degree: usize,
    pub max_weight: usize,
    pub layer: String,
    pub commutation: CommutationCheck,
    pub clusters: Vec<ClusterCertificate>,
    pub violations: usize,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub fn derivative_norm_certificate(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    max_weight: usize,
) -> Result<CertificateReport> {
    if !layer.is_unital() {
        return Err(Error::Unsupported("certificates need a unital layer".into()));
    }
    let commutation = if h.is_commuting() {
        is_commutation_preserving(layer, h, default_subset_cap(h.n_sites()), 2)?
    } else {
        CommutationCheck::InconclusiveWithinCap { reason: "Hamiltonian is not commuting".into() }
    };
    if let CommutationCheck::Violated { .. } = commutation {
        return Err(Error::Unsupported("layer is not commutation-preserving for this Hamiltonian".into()));
    }
    let dual = build_dual_graph(h);
    let clusters = enumerate_connected_clusters(&dual, max_weight, None)?;
    let certs = clusters
        .par_iter()
        .map(|w| {
            let (d_e, d_log) = cluster_derivatives(h, beta, layer, w)?;
            let norm = d_log.op_norm() / w.factorial() as f64;
            let bound = log_derivative_bound(dual.degree(), beta, w.weight());
            let connected_norm = d_e.op_norm();
            let connected_bound = beta.powi(w.weight() as i32);
            let pass = within(norm, bound) && within(connected_norm, connected_bound);
            Ok(ClusterCertificate { cluster: w.clone(), norm, bound, connected_norm, connected_bound, pass })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = certs.iter().filter(|c| !c.pass).count();
    Ok(CertificateReport {
        beta,
        dual_degree: dual.degree(),
        max_weight,
        layer: layer.describe(),
        commutation,
        clusters: certs,
        violations,
    })
}

/// Series of `E_Γ^Tr[ρ̃^{(y)}]` with `ρ̃^{(y)} = e^{−H^{(y)}} q^{|Y|}/Z_0`; the
/// pinning terms enter as a fixed factor, never as expansion variables.
pub fn pinned_series(ph: &PinnedHamiltonian, traced: &[usize], trunc: &Truncation) -> Result<TruncatedSeries<Diag>> {
    if let Some(s) = ph.y_sites.iter().find(|s| !traced.contains(s)) {
        return Err(Error::Config(format!("pinned site {s} must be traced")));
    }
    let h = ph.base();
    let (n, q) = (h.n_sites(), h.q());
    let mut layer = ChannelLayer::identity(n, q);
    for &s in traced {
        layer.push(SiteChannel::complete_depolarizing(s, q)?)?;
    }
    let unpinned = classical_series(h, ph.beta, &ChannelLayer::identity(n, q), trunc)?;
    let dim = q.pow(n as u32);
    let mut factor = vec![1.0; dim];
    let mut digits = vec![0usize; n];
    for (i, f) in factor.iter_mut().enumerate() {
        index_to_digits(i, q, &mut digits);
        for (j, &s) in ph.y_sites.iter().enumerate() {
            *f *= q as f64 * ph.pinning_weights(j)[digits[s]] / ph.normalizers[j];
        }
    }
    let factor = Diag(factor);
    let sites: Vec<usize> = (0..n).collect();
    let chans = channels_on(&layer, &sites);
    unpinned.try_map(|c| apply_channels_diag(&c.mul(&factor), &chans, n, q))
}

#[derive(Debug, Clone, Serialize)]
pub struct PinnedReport {
    pub outcome: Vec<usize>,
    pub degree: usize,
    /// Largest entry of `coefficient_0 − I`.
    pub identity_error: f64,
    /// Largest disconnected-cluster coefficient norm in the log series.
    pub max_disconnected_norm: f64,
    /// Largest `‖D_V E[ρ̃^{(y)}]‖ / β^{|V|}` over connected `V`.
    pub max_connected_ratio: f64,
    /// Largest `(‖D_W log‖/W!) / (2e(𝔡+1)β)^{|W|+1}` over connected `W`.
    pub max_log_ratio: f64,
    pub pass: bool,
}

pub fn pinned_series_check(
    h: &LocalHamiltonian,
    beta: f64,
    layer: &ChannelLayer,
    y: &[usize],
    degree: usize,
) -> Result<PinnedReport> {
    let ph = classical::pinned_hamiltonian(h, beta, layer, y)?;
    let trunc = Truncation::degree(degree);
    let s = pinned_series(&ph, layer.region(), &trunc)?;
    let c0 = s.constant_term();
    let identity_error = c0.0.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let log = s.log()?;
    let dual = build_dual_graph(h);
    let mut max_disconnected_norm = 0.0f64;
    for (m, c) in log.iter() {
        if let Some(w) = m.to_cluster() {
            if !w.is_connected(&dual) {
                max_disconnected_norm = max_disconnected_norm.max(c.op_norm());
            }
        }
    }
    let mut max_connected_ratio = 0.0f64;
    let mut max_log_ratio = 0.0f64;
    let connected = enumerate_connected_clusters(&dual, degree, None)?;
    if beta > 0.0 {
        for w in &connected {
            let d = s.derivative(w)?;
            max_connected_ratio = max_connected_ratio.max(d.op_norm() / beta.powi(w.weight() as i32));
            let log_norm = log.coefficient(&Monomial::from(w)).op_norm();
            max_log_ratio = max_log_ratio.max(log_norm / log_derivative_bound(dual.degree(), beta, w.weight()));
        }
    } else {
        max_connected_ratio = s.max_norm_where(|m| !m.is_one());
        max_log_ratio = log.max_norm_where(|m| !m.is_one());
    }
    let pass = identity_error <= 1e-12
        && max_disconnected_norm <= VANISHING_TOL
        && within(max_connected_ratio, 1.0)
        && within(max_log_ratio, 1.0);
    Ok(PinnedReport {
        outcome: y.to_vec(),
        degree,
        identity_error,
        max_disconnected_norm,
        max_connected_ratio,
        max_log_ratio,
        pass,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use crate::linalg;
    use crate::model::zoo;

    fn dense_channelled(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, lambda: &[f64]) -> Dense {
        let hl = h.with_lambdas(lambda).unwrap();
        let m = linalg::hermitian_function(&hl.dense_matrix().unwrap(), |x| (-beta * x).exp());
        let sites: Vec<usize> = (0..h.n_sites()).collect();
        apply_channels_dense(&m, &channels_on(layer, &sites), h.n_sites(), h.q())
    }

    fn dense_log(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, lambda: &[f64]) -> Dense {
        linalg::log_pd(&dense_channelled(h, beta, layer, lambda), 0.0).unwrap()
    }

    #[test]
    fn first_order_single_term() {
        let h = LocalHamiltonian::new(
            crate::model::SiteGraph::new(2, 2).unwrap(),
            vec![crate::model::TermSpec::pauli("XZ", 1.0).unwrap()],
        )
        .unwrap();
        let layer = ChannelLayer::new(2, 2, vec![SiteChannel::depolarizing(0, 2, 0.3).unwrap()]).unwrap();
        let s = series_of_channelled_gibbs(&h, 0.4, &layer, 1).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.constant_term() - Dense::identity(4, 4)).max_abs() < 1e-15);
        let sites = [0, 1];
        let ha = h.terms()[0].matrix_on(&sites, 2).unwrap();
        let want = apply_channels_dense(&ha, &channels_on(&layer, &sites), 2, 2) * Complex64::new(-0.4, 0.0);
        assert!((s.coefficient(&Monomial::var(0, 1)) - want).max_abs() < 1e-15);
    }

    #[test]
    fn truncation_error_shrinks_with_degree() {
        let h = zoo::cluster_chain(4).unwrap();
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::dephasing(1, 2, 0.2).unwrap()]).unwrap();
        let beta = 0.1;
        let lambda: Vec<f64> = h.terms().iter().map(|t| t.lambda).collect();
        let exact = dense_channelled(&h, beta, &layer, &lambda);
        let mut prev = f64::INFINITY;
        for d in 1..=4 {
            let s = series_of_channelled_gibbs(&h, beta, &layer, d).unwrap();
            let r = (s.evaluate(&lambda) - &exact).max_abs();
            assert!(r < prev * 0.5, "degree {d}: {r} vs {prev}");
            prev = r;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn non_commuting_series_matches_exponential() {
        let specs = vec![
            crate::model::TermSpec::pauli("XX", 0.8).unwrap(),
            crate::model::TermSpec::pauli("ZI", -0.5).unwrap(),
        ];
        let h = LocalHamiltonian::new(crate::model::SiteGraph::new(2, 2).unwrap(), specs).unwrap();
        assert!(!h.is_commuting());
        let lambda = [0.8, -0.5];
        let s = series_of_channelled_gibbs(&h, 0.05, &ChannelLayer::identity(2, 2), 6).unwrap();
        let exact = dense_channelled(&h, 0.05, &ChannelLayer::identity(2, 2), &lambda);
        assert!((s.evaluate(&lambda) - exact).max_abs() < 1e-10);
    }

    #[test]
    fn depolarizing_equals_partial_trace() {
        let h = zoo::ising_chain(3, 1.0).unwrap();
        let beta = 0.3;
        let full = series_of_channelled_gibbs(&h, beta, &ChannelLayer::identity(3, 2), 3).unwrap();
        let traced = series_of_channelled_gibbs(&h, beta, &ChannelLayer::identity(3, 2).compose_with_trace(&[2]).unwrap(), 3).unwrap();
        for (m, c) in full.iter() {
            let pt = linalg::partial_trace(c, &[0, 1], 3, 2) * Complex64::new(0.5, 0.0);
            let want = linalg::embed_with_identity(&pt, &[0, 1], 3, 2);
            assert!((traced.coefficient(m) - want).max_abs() < 1e-14, "{m}");
        }
    }

    #[test]
    fn disconnected_log_derivatives_vanish() {
        let h = zoo::ising_chain(5, 1.0).unwrap();
        let layer = ChannelLayer::uniform(5, 2, &[1, 2, 3], |s| SiteChannel::depolarizing(s, 2, 0.3)).unwrap();
        let s = series_of_channelled_gibbs(&h, 0.3, &layer, 4).unwrap().log().unwrap();
        let dual = build_dual_graph(&h);
        let mut checked = 0;
        for (m, c) in s.iter() {
            if let Some(w) = m.to_cluster() {
                if !w.is_connected(&dual) {
                    assert!(c.op_norm() <= VANISHING_TOL, "{w}: {}", c.op_norm());
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn product_rule_for_disconnected_clusters() {
        let h = zoo::ising_chain(5, 1.0).unwrap();
        let layer = ChannelLayer::uniform(5, 2, &[0, 2, 4], |s| SiteChannel::dephasing(s, 2, 0.25)).unwrap();
        let s = series_of_channelled_gibbs(&h, 0.4, &layer, 4).unwrap();
        let (w1, w2) = (Cluster::new([(0, 2)]).unwrap(), Cluster::new([(2, 1), (3, 1)]).unwrap());
        let lhs = s.derivative(&w1.union(&w2)).unwrap();
        let rhs = s.derivative(&w1).unwrap() * s.derivative(&w2).unwrap();
        assert!((lhs - rhs).max_abs() < 1e-12);
    }

    #[test]
    fn weight_one_log_derivative_is_first_order() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::depolarizing(1, 2, 0.4).unwrap()]).unwrap();
        let beta = 0.7;
        let w = Cluster::single(1);
        let (_, d) = cluster_derivatives(&h, beta, &layer, &w).unwrap();
        let sites = cluster_support(&h, &w);
        let want = apply_channels_dense(&h.terms()[1].matrix_on(&sites, 2).unwrap(), &channels_on(&layer, &sites), 2, 2)
            * Complex64::new(-beta, 0.0);
        assert!((d - want).max_abs() < 1e-14);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        // central differences of the exact dense log at λ = 0
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let layer = ChannelLayer::uniform(4, 2, &[1, 2], |s| SiteChannel::depolarizing(s, 2, 0.3)).unwrap();
        let beta = 0.5;
        let step = 1e-3;
        let s = series_of_channelled_gibbs(&h, beta, &layer, 2).unwrap().log().unwrap();
        let at = |pairs: &[(usize, f64)]| {
            let mut l = vec![0.0; 3];
            for &(a, v) in pairs {
                l[a] += v;
            }
            dense_log(&h, beta, &layer, &l)
        };
        for a in 0..3 {
            let fd = (at(&[(a, step)]) - at(&[(a, -step)])) / Complex64::new(2.0 * step, 0.0);
            let d = s.derivative(&Cluster::single(a)).unwrap();
            assert!((fd - &d).norm() <= 1e-6 * d.norm(), "term {a}");
        }
        let (a, b) = (0, 1);
        let fd = (at(&[(a, step), (b, step)]) - at(&[(a, step), (b, -step)]) - at(&[(a, -step), (b, step)])
            + at(&[(a, -step), (b, -step)]))
            / Complex64::new(4.0 * step * step, 0.0);
        let d = s.derivative(&Cluster::new([(a, 1), (b, 1)]).unwrap()).unwrap();
        assert!((fd - &d).norm() <= 1e-6 * d.norm().max(1e-3));
    }

    #[test]
    fn ising_cmi_series_vanishing_and_lowest_weight() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let p = Partition::new(vec![0], vec![1, 2], vec![3], 4).unwrap();
        let layer = ChannelLayer::uniform(4, 2, &[1, 2], |s| SiteChannel::depolarizing(s, 2, 0.2)).unwrap();
        let s = cmi_operator_series(&h, 0.2, &layer, &p, 4).unwrap();
        let zero = s.expected_zero(&h);
        assert!(!zero.is_empty());
        assert!(zero.iter().all(|e| e.norm <= VANISHING_TOL), "{zero:?}");
        assert_eq!(s.lowest_nonvanishing_weight(), Some(3));
        let none = cmi_operator_series(&h, 0.0, &layer, &p, 3).unwrap();
        assert_eq!(none.lowest_nonvanishing_weight(), None);
    }

    #[test]
    fn cmi_series_bounds_dense_cmi() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let p = Partition::new(vec![0], vec![1, 2], vec![3], 4).unwrap();
        let layer = ChannelLayer::uniform(4, 2, &[1, 2], |s| SiteChannel::depolarizing(s, 2, 0.1)).unwrap();
        let dual = build_dual_graph(&h);
        let beta_c = 1.0 / (2.0 * std::f64::consts::E * (dual.degree() as f64 + 1.0) * (1.0 + std::f64::consts::E * (dual.degree() as f64 - 1.0)));
        let beta = beta_c / 2.0;
        let s = cmi_operator_series(&h, beta, &layer, &p, 6).unwrap();
        let lambda = vec![1.0; 3];
        let approx = s.evaluate(&lambda).op_norm();
        let op = dense::cmi_operator(&h, beta, &layer, &p).unwrap();
        let rho = dense::apply_layer(&dense::gibbs_state(&h, beta).unwrap(), &layer).unwrap();
        let cmi_nats = dense::quantum_cmi(&rho, &p).unwrap() * std::f64::consts::LN_2;
        assert!((approx - op.norm()).abs() <= 1e-6 * op.norm().max(1e-12) + 1e-14, "{approx} vs {}", op.norm());
        assert!(cmi_nats <= approx * (1.0 + 1e-9));
    }

    #[test]
    fn log_reconstruction_from_connected_derivatives() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let layer = ChannelLayer::uniform(4, 2, &[1, 2], |s| SiteChannel::dephasing(s, 2, 0.3)).unwrap();
        let mut cache = ChromaticCache::new();
        for w in [
            Cluster::new([(0, 1), (1, 1), (2, 1)]).unwrap(),
            Cluster::new([(0, 2), (1, 1)]).unwrap(),
            Cluster::new([(1, 3)]).unwrap(),
            Cluster::new([(0, 1), (2, 1)]).unwrap(),
        ] {
            let (_, direct) = cluster_derivatives(&h, 0.6, &layer, &w).unwrap();
            let rebuilt = reconstruct_log_derivative(&h, 0.6, &layer, &w, &mut cache).unwrap();
            assert!((&direct - &rebuilt).norm() <= 1e-6 * direct.norm().max(1e-12) + 1e-12, "{w}");
        }
    }

    #[test]
    fn certificate_small_ising() {
        let h = zoo::ising_chain(6, 1.0).unwrap();
        let layer = ChannelLayer::uniform(6, 2, &[2, 3], |s| SiteChannel::depolarizing(s, 2, 0.5)).unwrap();
        let r = derivative_norm_certificate(&h, 0.05, &layer, 4).unwrap();
        assert!(r.passed(), "{:?}", r.clusters.iter().find(|c| !c.pass));
        assert!(!r.clusters.is_empty());
        let zero = derivative_norm_certificate(&h, 0.0, &layer, 3).unwrap();
        assert!(zero.clusters.iter().all(|c| c.norm == 0.0 && c.pass));
    }

    #[test]
    fn pinned_checks() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let t = nalgebra::DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::transition(1, t.clone()).unwrap(), SiteChannel::transition(2, t).unwrap()]).unwrap();
        for y in classical::all_outcomes(2, 2) {
            let r = pinned_series_check(&h, 0.3, &layer, &y, 4).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let skew = nalgebra::DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.1, 0.8]);
        let layer2 = ChannelLayer::new(4, 2, vec![SiteChannel::transition(1, skew).unwrap()]).unwrap();
        for y in classical::all_outcomes(1, 2) {
            let r = pinned_series_check(&h, 0.1, &layer2, &y, 4).unwrap();
            assert!(r.pass, "{r:?}");
        }
        let r = pinned_series_check(&h, 0.0, &layer, &[0, 1], 3).unwrap();
        assert!(r.identity_error < 1e-15);
        assert_eq!(r.max_connected_ratio, 0.0);
    }

    #[test]
    fn uniform_pinning_is_plain_trace() {
        let h = zoo::ising_chain(4, 1.0).unwrap();
        let u = nalgebra::DMatrix::from_element(2, 2, 0.5);
        let layer = ChannelLayer::new(4, 2, vec![SiteChannel::transition(1, u.clone()).unwrap(), SiteChannel::transition(2, u).unwrap()]).unwrap();
        let ph = classical::pinned_hamiltonian(&h, 0.4, &layer, &[1, 0]).unwrap();
        let trunc = Truncation::degree(3);
        let pinned = pinned_series(&ph, &[1, 2], &trunc).unwrap();
        let plain = classical_series(&h, 0.4, &ChannelLayer::identity(4, 2).compose_with_trace(&[1, 2]).unwrap(), &trunc).unwrap();
        for (m, c) in plain.iter() {
            let d = pinned.coefficient(m);
            assert!(c.0.iter().zip(&d.0).all(|(a, b)| (a - b).abs() < 1e-14), "{m}");
        }
    }

    #[test]
    fn diagonal_series_matches_dense() {
        let h = zoo::ising_chain(3, 0.7).unwrap();
        let t = nalgebra::DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.2, 0.7]);
        let layer = ChannelLayer::new(3, 2, vec![SiteChannel::transition(1, t).unwrap()]).unwrap();
        let trunc = Truncation::degree(3);
        let d = classical_series(&h, 0.5, &layer, &trunc).unwrap();
        let sites = [0, 1, 2];
        let m = channelled_gibbs_series_on(&h, 0.5, &layer, &trunc, &sites);
        // transition channels are not unital in general, so only the diagonal path applies
        assert!(m.is_err());
        let id = classical_series(&h, 0.5, &ChannelLayer::identity(3, 2), &trunc).unwrap();
        let md = series_of_channelled_gibbs(&h, 0.5, &ChannelLayer::identity(3, 2), 3).unwrap();
        for (mono, c) in id.iter() {
            let dense = md.coefficient(mono);
            assert!(c.0.iter().enumerate().all(|(i, v)| (dense[(i, i)].re - v).abs() < 1e-14));
        }
        assert!(d.len() > 0);
    }
}
