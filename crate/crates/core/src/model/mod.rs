//! Sites, Pauli strings, local Hamiltonians, partitions and the dual interaction graph.

mod graph;
mod hamiltonian;
pub mod io;
mod pauli;
pub mod zoo;

pub use graph::{build_dual_graph, distance_between, graph_distance, terms_touching, Distance, DualInteractionGraph, Partition};
pub use hamiltonian::{
    config_to_qubit_mask, digits_to_index, index_to_digits, verify_commuting, HamiltonianTerm, LocalHamiltonian,
    SiteGraph, TermOperator, TermSpec,
};
pub use pauli::{product_phase, qubit_mask_to_index, symplectic_commutes, PauliString, MAX_QUBITS};
