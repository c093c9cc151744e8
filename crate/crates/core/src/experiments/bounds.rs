use crate::error::{Error, Result};

/// `H(D) = -D log₂ D - (1-D) log₂(1-D)`, with `H(0) = H(1) = 0`.
pub fn binary_entropy(d: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    term(d) + term(1.0 - d)
}

/// Fannes–Audenaert continuity bound `D log₂(dim) + H(D)` on `|S(ρ) - S(σ)|`.
pub fn fannes_audenaert(trace_distance: f64, dim: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&trace_distance) || dim < 2 {
        return Err(Error::Config(format!("need D in [0,1] and dim >= 2, got D = {trace_distance}, dim = {dim}")));
    }
    Ok(trace_distance * (dim as f64).log2() + binary_entropy(trace_distance))
}

/// Proof-constant lower bound `2k - 4k√q - 3(3/2)^{2/3} q^{1/6}` on the CMI
/// (bits) of a foliated code with `k` logical qubits and logical error rate
/// `q`, floored at 0.
pub fn theorem3_bound(k: u32, q: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("logical error rate q = {q} must lie in [0, 1]")));
    }
    let k = k as f64;
    let entropy_term = 3.0 * 1.5f64.powf(2.0 / 3.0) * q.powf(1.0 / 6.0);
    Ok((2.0 * k - 4.0 * k * q.sqrt() - entropy_term).max(0.0))
}
