//! Dense helpers on `q^n`-dimensional matrices: local operators, partial
//! traces and Hermitian spectral functions.
//!
//! Index convention: site 0 is the most significant digit.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::Complex64;

/// Row-index layout for an operator acting on `positions` of an `n`-digit register.
pub(crate) struct LocalLayout {
    /// Offset of each local index (first position most significant).
    pub offsets: Vec<usize>,
    /// Full indices with the local digits set to zero.
    pub bases: Vec<usize>,
}

pub(crate) fn stride(n: usize, q: usize, pos: usize) -> usize {
    q.pow((n - 1 - pos) as u32)
}

pub(crate) fn local_layout(n: usize, q: usize, positions: &[usize]) -> LocalLayout {
    let k = positions.len();
    let strides: Vec<usize> = positions.iter().map(|&p| stride(n, q, p)).collect();
    let local_dim = q.pow(k as u32);
    let mut offsets = vec![0usize; local_dim];
    for (l, off) in offsets.iter_mut().enumerate() {
        let mut rem = l;
        for j in (0..k).rev() {
            *off += (rem % q) * strides[j];
            rem /= q;
        }
    }
    let rest: Vec<usize> = (0..n).filter(|p| !positions.contains(p)).collect();
    let rest_strides: Vec<usize> = rest.iter().map(|&p| stride(n, q, p)).collect();
    let n_bases = q.pow(rest.len() as u32);
    let mut bases = vec![0usize; n_bases];
    for (b, base) in bases.iter_mut().enumerate() {
        let mut rem = b;
        for j in (0..rest.len()).rev() {
            *base += (rem % q) * rest_strides[j];
            rem /= q;
        }
    }
    LocalLayout { offsets, bases }
}

/// `(op ⊗ I) · m` with `op` acting on the digits at `positions`.
pub(crate) fn left_apply(
    m: &DMatrix<Complex64>,
    op: &DMatrix<Complex64>,
    positions: &[usize],
    n: usize,
    q: usize,
) -> DMatrix<Complex64> {
    let layout = local_layout(n, q, positions);
    let ld = layout.offsets.len();
    debug_assert_eq!(op.nrows(), ld);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let mut buf = vec![Complex64::zero(); ld];
    // Skip structurally zero entries of sparse local operators.
    let nz: Vec<(usize, usize, Complex64)> = (0..ld)
        .flat_map(|r| (0..ld).map(move |c| (r, c)))
        .filter_map(|(r, c)| {
            let v = op[(r, c)];
            (v != Complex64::zero()).then_some((r, c, v))
        })
        .collect();
    for c in 0..m.ncols() {
        let col = m.column(c);
        let mut ocol = out.column_mut(c);
        for &base in &layout.bases {
            for (l, b) in buf.iter_mut().enumerate() {
                *b = col[base + layout.offsets[l]];
            }
            for &(r, cc, v) in &nz {
                ocol[base + layout.offsets[r]] += v * buf[cc];
            }
        }
    }
    out
}

/// `(K ⊗ I) m (K ⊗ I)^†`.
pub(crate) fn sandwich(
    m: &DMatrix<Complex64>,
    k: &DMatrix<Complex64>,
    positions: &[usize],
    n: usize,
    q: usize,
) -> DMatrix<Complex64> {
    let left = left_apply(m, k, positions, n, q);
    left_apply(&left.adjoint(), k, positions, n, q).adjoint()
}

/// `Σ_k (K_k ⊗ I) m (K_k ⊗ I)^†`.
pub(crate) fn apply_kraus(
    m: &DMatrix<Complex64>,
    kraus: &[DMatrix<Complex64>],
    positions: &[usize],
    n: usize,
    q: usize,
) -> DMatrix<Complex64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in kraus {
        out += sandwich(m, k, positions, n, q);
    }
    out
}

/// `Tr_pos(m) ⊗ I/q` on a single digit.
pub(crate) fn depolarize_digit(m: &DMatrix<Complex64>, pos: usize, n: usize, q: usize) -> DMatrix<Complex64> {
    let layout = local_layout(n, q, &[pos]);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    let inv_q = 1.0 / q as f64;
    for &bc in &layout.bases {
        for &br in &layout.bases {
            let mut t = Complex64::zero();
            for &o in &layout.offsets {
                t += m[(br + o, bc + o)];
            }
            let t = t * inv_q;
            for &o in &layout.offsets {
                out[(br + o, bc + o)] = t;
            }
        }
    }
    out
}

/// Partial trace keeping the (sorted) digits `keep`.
pub(crate) fn partial_trace(m: &DMatrix<Complex64>, keep: &[usize], n: usize, q: usize) -> DMatrix<Complex64> {
    let layout = local_layout(n, q, keep);
    let kd = layout.offsets.len();
    let mut out = DMatrix::zeros(kd, kd);
    for &t in &layout.bases {
        for b in 0..kd {
            let cb = t + layout.offsets[b];
            for a in 0..kd {
                out[(a, b)] += m[(t + layout.offsets[a], cb)];
            }
        }
    }
    out
}

/// `m_keep ⊗ I` with `m_keep` living on the (sorted) digits `keep`.
pub(crate) fn embed_with_identity(
    m_keep: &DMatrix<Complex64>,
    keep: &[usize],
    n: usize,
    q: usize,
) -> DMatrix<Complex64> {
    let layout = local_layout(n, q, keep);
    let dim = q.pow(n as u32);
    let kd = layout.offsets.len();
    let mut out = DMatrix::zeros(dim, dim);
    for &t in &layout.bases {
        for b in 0..kd {
            for a in 0..kd {
                out[(t + layout.offsets[a], t + layout.offsets[b])] = m_keep[(a, b)];
            }
        }
    }
    out
}

/// Complex product through real GEMMs; a single one when both factors are real.
pub(crate) fn complex_matmul(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let a_real = ai.iter().all(|v| *v == 0.0);
    let b_real = bi.iter().all(|v| *v == 0.0);
    let re = &ar * &br;
    match (a_real, b_real) {
        (true, true) => re.map(|v| Complex64::new(v, 0.0)),
        (true, false) => re.zip_map(&(&ar * &bi), Complex64::new),
        (false, true) => re.zip_map(&(&ai * &br), Complex64::new),
        (false, false) => (re - &ai * &bi).zip_map(&(&ar * &bi + &ai * &br), Complex64::new),
    }
}

pub(crate) fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub(crate) fn eigenvalues_hermitian(m: &DMatrix<Complex64>) -> DVector<f64> {
    hermitian_part(m).symmetric_eigenvalues()
}

/// Entropy in nats of a spectrum, dropping eigenvalues below `floor`.
pub(crate) fn entropy_nats(eigs: impl IntoIterator<Item = f64>, floor: f64) -> f64 {
    eigs.into_iter().filter(|&l| l > floor).map(|l| -l * l.ln()).sum()
}

/// Hermitian matrix function through the eigendecomposition.
pub(crate) fn hermitian_function(m: &DMatrix<Complex64>, f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let eig = hermitian_part(m).symmetric_eigen();
    let v = &eig.eigenvectors;
    let fv = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| Complex64::new(f(l), 0.0)),
    );
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= fv[j];
    }
    scaled * v.adjoint()
}

/// Matrix logarithm of a positive definite Hermitian matrix.
pub(crate) fn log_pd(m: &DMatrix<Complex64>, floor: f64) -> Result<DMatrix<Complex64>> {
    let eig = hermitian_part(m).symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < floor {
        return Err(Error::NotPositiveDefinite(min));
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new(eig.eigenvalues[j].ln(), 0.0);
    }
    Ok(scaled * v.adjoint())
}

/// Largest singular value.
pub(crate) fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Operator norm of a Hermitian matrix via its spectrum.
pub(crate) fn operator_norm_hermitian(m: &DMatrix<Complex64>) -> f64 {
    eigenvalues_hermitian(m).iter().fold(0.0, |a, &l| a.max(l.abs()))
}

/// Trace norm of a Hermitian matrix.
pub(crate) fn trace_norm_hermitian(m: &DMatrix<Complex64>) -> f64 {
    eigenvalues_hermitian(m).iter().map(|l| l.abs()).sum()
}

pub(crate) fn trace(m: &DMatrix<Complex64>) -> Complex64 {
    m.diagonal().iter().copied().sum()
}

pub(crate) fn identity(dim: usize) -> DMatrix<Complex64> {
    DMatrix::identity(dim, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn complex_matmul_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_matrix(6, &mut rng);
        let b = random_matrix(6, &mut rng);
        let real = a.map(|z| Complex64::new(z.re, 0.0));
        for (x, y) in [(&a, &b), (&real, &b), (&a, &real), (&real, &real)] {
            assert!((complex_matmul(x, y) - x * y).iter().all(|z| z.norm() < 1e-13));
        }
    }

    /// Oracle: explicit Kronecker product of identities around `op` on one digit.
    fn kron_embed(op: &DMatrix<Complex64>, pos: usize, n: usize, q: usize) -> DMatrix<Complex64> {
        let mut m = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for p in 0..n {
            let f = if p == pos { op.clone() } else { identity(q) };
            m = m.kronecker(&f);
        }
        m
    }

    #[test]
    fn left_apply_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (n, q) = (3, 3);
        let m = random_matrix(27, &mut rng);
        let op = random_matrix(3, &mut rng);
        for pos in 0..n {
            let want = kron_embed(&op, pos, n, q) * &m;
            assert!((left_apply(&m, &op, &[pos], n, q) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn two_digit_operator_matches_kronecker() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (n, q) = (3, 2);
        let a = random_matrix(2, &mut rng);
        let b = random_matrix(2, &mut rng);
        let op = a.kronecker(&b);
        let m = random_matrix(8, &mut rng);
        let want = kron_embed(&a, 0, n, q) * kron_embed(&b, 2, n, q) * &m;
        assert!((left_apply(&m, &op, &[0, 2], n, q) - &want).norm() < 1e-12);
        // reversed positions swap the factors
        let op_rev = b.kronecker(&a);
        assert!((left_apply(&m, &op_rev, &[2, 0], n, q) - want).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_matches_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, q) = (3, 2);
        let m = random_matrix(8, &mut rng);
        let pt = partial_trace(&m, &[0, 2], n, q);
        for a0 in 0..2 {
            for a2 in 0..2 {
                for b0 in 0..2 {
                    for b2 in 0..2 {
                        let mut want = Complex64::zero();
                        for t in 0..2 {
                            want += m[(a0 * 4 + t * 2 + a2, b0 * 4 + t * 2 + b2)];
                        }
                        assert!((pt[(a0 * 2 + a2, b0 * 2 + b2)] - want).norm() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn depolarize_equals_trace_then_embed() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, q) = (3, 2);
        let m = random_matrix(8, &mut rng);
        let d = depolarize_digit(&m, 1, n, q);
        let want = embed_with_identity(&partial_trace(&m, &[0, 2], n, q), &[0, 2], n, q) * Complex64::new(0.5, 0.0);
        assert!((d - want).norm() < 1e-13);
    }

    #[test]
    fn log_inverts_exp() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(6, &mut rng);
        let h = hermitian_part(&a);
        let e = hermitian_function(&h, f64::exp);
        let l = log_pd(&e, 1e-12).unwrap();
        assert!((l - h).norm() < 1e-10);
        assert!(log_pd(&(identity(2) * Complex64::new(-1.0, 0.0)), 1e-12).is_err());
    }
}
