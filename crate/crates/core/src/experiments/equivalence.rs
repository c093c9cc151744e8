use serde::Serialize;

use super::spec::{Beta, Engine};
use crate::channels::{ChannelLayer, SiteChannel};
use crate::dense;
use crate::error::{Error, Result};
use crate::model::zoo;
use crate::pauli;

pub const EQUIVALENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub beta: Beta,
    /// Dephasing probability `1/(e^{2β}+1)`.
    pub p: f64,
    pub engine: Engine,
    /// Trace distance (dense) or largest normalized Pauli coefficient gap (pauli).
    pub deviation: f64,
    pub pass: bool,
}

pub fn dephasing_probability(beta: Beta) -> f64 {
    if beta.is_infinite() {
        0.0
    } else {
        1.0 / ((2.0 * beta.value()).exp() + 1.0)
    }
}

/// Compares the Gibbs state of the cluster chain with the cluster state after
/// `Z` dephasing of strength `1/(e^{2β}+1)` on every site.
pub fn cluster_gibbs_equivalence(n: usize, beta: Beta, engine: Engine) -> Result<EquivalenceReport> {
    let h = zoo::cluster_chain(n)?;
    let p = dephasing_probability(beta);
    let layer = ChannelLayer::uniform(n, 2, &(0..n).collect::<Vec<_>>(), |s| SiteChannel::dephasing(s, 2, p))?;
    let deviation = match engine {
        Engine::Dense => {
            let gibbs = dense::gibbs_state(&h, beta.value())?;
            let dephased = dense::apply_layer(&dense::gibbs_state(&h, f64::INFINITY)?, &layer)?;
            dense::trace_distance(&gibbs, &dephased)
        }
        Engine::Pauli => {
            let gibbs = pauli::expand_gibbs(&h, beta.value())?;
            let dephased = pauli::apply_pauli_layer(&pauli::expand_gibbs(&h, f64::INFINITY)?, &layer)?;
            gibbs.max_normalized_deviation(&dephased)
        }
        Engine::Classical => return Err(Error::Config("the cluster chain needs the dense or pauli engine".into())),
    };
    Ok(EquivalenceReport { n, beta, p, engine, deviation, pass: deviation <= EQUIVALENCE_TOL })
}
