//! End-to-end studies: decay curves and Markov-length fits, the cluster-state
//! equivalence check, and the low-temperature bound calculator.

mod bounds;
mod decay;
mod equivalence;
mod spec;

pub use bounds::{binary_entropy, fannes_audenaert, theorem3_bound};
pub use decay::{
    analytic_markov_length, beta_c, chain_size_for_distance, decay_curve, fit_curve, fit_markov_length,
    low_temperature_chain_demo, BetaFit, DecayCurve, DecayPoint, DecaySpec, MarkovLengthFit, DIVERGENCE_SLOPE, FIT_FLOOR,
};
pub use equivalence::{cluster_gibbs_equivalence, dephasing_probability, EquivalenceReport, EQUIVALENCE_TOL};
pub use spec::{cmi_with_engine, Beta, ChannelKindSpec, ChannelSpec, Engine};
