//! Dense density-matrix engine for small quantum systems.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::caps::{self, Caps};
use crate::channels::{apply_site_channel_dense, ChannelLayer};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LocalHamiltonian, Partition};
use crate::{Complex64, LN2};

const HERMITIAN_TOL: f64 = 1e-10;
const EIGEN_CLAMP: f64 = 1e-15;
const LOG_FLOOR: f64 = 1e-12;
const GROUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n: usize,
    q: usize,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps a Hermitian, unit-trace matrix on `n` sites of dimension `q`.
    pub fn new(n: usize, q: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = q.pow(n as u32);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Consistency(format!("matrix is {}×{}, expected {dim}", matrix.nrows(), matrix.ncols())));
        }
        let asym = (&matrix - matrix.adjoint()).norm();
        if asym > HERMITIAN_TOL * matrix.norm().max(1.0) {
            return Err(Error::Consistency(format!("matrix is not Hermitian (deviation {asym:e})")));
        }
        let tr = linalg::trace(&matrix);
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::Consistency(format!("trace {tr} is not 1")));
        }
        Ok(DensityMatrix { n, q, matrix })
    }

    fn normalized(n: usize, q: usize, m: DMatrix<Complex64>) -> Result<Self> {
        let tr = linalg::trace(&m).re;
        if !(tr > 0.0) || !tr.is_finite() {
            return Err(Error::Consistency(format!("cannot normalize matrix with trace {tr}")));
        }
        DensityMatrix::new(n, q, linalg::hermitian_part(&m) / Complex64::new(tr, 0.0))
    }

    pub fn maximally_mixed(n: usize, q: usize) -> Result<Self> {
        let dim = dense_dim(n, q)?;
        Ok(DensityMatrix { n, q, matrix: linalg::identity(dim) / Complex64::new(dim as f64, 0.0) })
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigenvalues_hermitian(&self.matrix).iter().copied().collect()
    }
}

fn dense_dim(n: usize, q: usize) -> Result<usize> {
    let cap = Caps::get().dense_dim;
    let dim = q.checked_pow(n as u32).ok_or(Error::CapExceeded { what: "dense dimension", value: usize::MAX, cap })?;
    caps::check("dense dimension", dim, cap)?;
    Ok(dim)
}

/// Local factor `exp(-βλ(h - h_min))` of one term; at `β = ∞` the projector
/// onto the lowest eigenspace of `λh`.
fn term_boltzmann(local: &DMatrix<Complex64>, lambda: f64, beta: f64) -> DMatrix<Complex64> {
    let scaled = local * Complex64::new(lambda, 0.0);
    let min = linalg::eigenvalues_hermitian(&scaled).iter().cloned().fold(f64::INFINITY, f64::min);
    if beta.is_infinite() {
        linalg::hermitian_function(&scaled, |x| if x - min <= GROUND_TOL { 1.0 } else { 0.0 })
    } else {
        linalg::hermitian_function(&scaled, |x| (-beta * (x - min)).exp())
    }
}

/// Normalized Gibbs state. Commuting models use a product of per-term
/// exponentials; others diagonalize the full Hamiltonian.
pub fn gibbs_state(h: &LocalHamiltonian, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::Config(format!("beta = {beta} must be nonnegative")));
    }
    let (n, q) = (h.n_sites(), h.q());
    let dim = dense_dim(n, q)?;
    if !h.is_commuting() {
        if beta.is_infinite() {
            return Err(Error::Unsupported("beta = inf for non-commuting Hamiltonians".into()));
        }
        return gibbs_state_general(h, beta);
    }
    let mut m = linalg::identity(dim);
    for t in h.terms() {
        let f = term_boltzmann(&t.local_matrix(q)?, t.lambda, beta);
        m = linalg::left_apply(&m, &f, &t.support, n, q);
    }
    if linalg::trace(&m).re <= 1e-300 {
        return Err(Error::Unsupported("terms have no common ground state; use a finite beta".into()));
    }
    DensityMatrix::normalized(n, q, m)
}

/// `exp(-βH)/Z` through a full eigendecomposition of `H`.
pub fn gibbs_state_general(h: &LocalHamiltonian, beta: f64) -> Result<DensityMatrix> {
    let hm = h.dense_matrix()?;
    let min = linalg::eigenvalues_hermitian(&hm).iter().cloned().fold(f64::INFINITY, f64::min);
    let m = linalg::hermitian_function(&hm, |x| (-beta * (x - min)).exp());
    DensityMatrix::normalized(h.n_sites(), h.q(), m)
}

pub fn apply_layer(rho: &DensityMatrix, layer: &ChannelLayer) -> Result<DensityMatrix> {
    if layer.n_sites() != rho.n || layer.q() != rho.q {
        return Err(Error::Consistency(format!(
            "layer on {} sites of dimension {} applied to state on {} sites of dimension {}",
            layer.n_sites(),
            layer.q(),
            rho.n,
            rho.q
        )));
    }
    let mut m = rho.matrix.clone();
    for c in layer.iter() {
        m = apply_site_channel_dense(&m, c, c.site(), rho.n, rho.q);
    }
    DensityMatrix::normalized(rho.n, rho.q, m)
}

pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&s| s >= rho.n) {
        return Err(Error::InvalidPartition("kept site outside the register".into()));
    }
    let m = linalg::partial_trace(&rho.matrix, &keep, rho.n, rho.q);
    Ok(DensityMatrix { n: keep.len(), q: rho.q, matrix: m })
}

/// Von Neumann entropy in bits; eigenvalues below `1e-15` are dropped.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    if rho.n == 0 {
        return 0.0;
    }
    linalg::entropy_nats(rho.eigenvalues(), EIGEN_CLAMP) / LN2
}

pub fn region_entropy(rho: &DensityMatrix, region: &[usize]) -> Result<f64> {
    if region.is_empty() {
        return Ok(0.0);
    }
    Ok(von_neumann_entropy(&partial_trace(rho, region)?))
}

/// `S(AB) + S(BC) - S(B) - S(ABC)` in bits.
pub fn quantum_cmi(rho: &DensityMatrix, p: &Partition) -> Result<f64> {
    let abc = p.abc();
    let reduced = partial_trace(rho, &abc)?;
    let pos = |set: Vec<usize>| -> Vec<usize> { set.iter().map(|s| abc.binary_search(s).unwrap()).collect() };
    let s_ab = region_entropy(&reduced, &pos(p.ab()))?;
    let s_bc = region_entropy(&reduced, &pos(p.bc()))?;
    let s_b = region_entropy(&reduced, &pos(p.b().to_vec()))?;
    let s_abc = von_neumann_entropy(&reduced);
    Ok(s_ab + s_bc - s_b - s_abc)
}

pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    0.5 * linalg::trace_norm_hermitian(&(&a.matrix - &b.matrix))
}

/// `H(A:C|E[B]) = log E[ρ̃_AB] + log E[ρ̃_BC] - log E[ρ̃_B] - log E[ρ̃_ABC]`.
#[derive(Debug, Clone)]
pub struct CmiOperator {
    pub matrix: DMatrix<Complex64>,
    /// `[log E[ρ̃_AB], log E[ρ̃_BC], log E[ρ̃_B], log E[ρ̃_ABC]]`.
    pub logs: [DMatrix<Complex64>; 4],
    /// The channel-applied state `E[ρ]`.
    pub state: DensityMatrix,
}

impl CmiOperator {
    /// Operator norm (natural-log units).
    pub fn norm(&self) -> f64 {
        linalg::operator_norm_hermitian(&self.matrix)
    }

    /// `-Tr(E[ρ] H(A:C|E[B]))` converted to bits.
    pub fn trace_cmi_bits(&self) -> f64 {
        -linalg::trace(&(self.state.matrix() * &self.matrix)).re / LN2
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CmiOperatorSummary {
    pub norm_nats: f64,
    pub trace_cmi_bits: f64,
}

pub fn cmi_operator(h: &LocalHamiltonian, beta: f64, layer: &ChannelLayer, p: &Partition) -> Result<CmiOperator> {
    if !layer.is_unital() {
        return Err(Error::Unsupported("the operator-log form needs a unital layer".into()));
    }
    let sigma = apply_layer(&gibbs_state(h, beta)?, layer)?;
    let (n, q) = (sigma.n, sigma.q);
    let log_of = |region: &[usize]| -> Result<DMatrix<Complex64>> {
        let reduced = linalg::partial_trace(sigma.matrix(), region, n, q);
        let embedded = linalg::embed_with_identity(&reduced, region, n, q);
        linalg::log_pd(&embedded, LOG_FLOOR)
    };
    let [ab, bc, b, abc] = p.regions();
    let logs = [log_of(&ab)?, log_of(&bc)?, log_of(&b)?, log_of(&abc)?];
    let matrix = &logs[0] + &logs[1] - &logs[2] - &logs[3];
    Ok(CmiOperator { matrix, logs, state: sigma })
}
