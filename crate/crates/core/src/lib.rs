//! Conditional mutual information of Gibbs states under local channels.
//!
//! Three exact engines ([`classical`], [`dense`], [`pauli`]) evaluate CMI of
//! `E[e^{-βH}/Z]`; [`cluster`] and [`combinatorics`] implement the cluster
//! expansion with its vanishing and norm-bound checks; [`experiments`] runs
//! decay sweeps and fits Markov lengths; [`cli_io`] handles config files.

pub mod caps;
pub mod channels;
pub mod classical;
pub mod cli_io;
pub mod cluster;
pub mod combinatorics;
pub mod dense;
pub mod error;
pub mod experiments;
mod linalg;
pub mod model;
pub mod pauli;

pub use caps::Caps;
pub use error::{Error, Result};

pub type Complex64 = nalgebra::Complex<f64>;

pub(crate) const LN2: f64 = std::f64::consts::LN_2;
