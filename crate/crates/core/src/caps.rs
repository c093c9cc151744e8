//! Size caps shared by the engines.
//!
//! Defaults can be raised through environment variables named
//! `CMI_LAB_CAP_<FIELD>` (for example `CMI_LAB_CAP_DENSE_DIM=8192`). Raising
//! them is allowed but runtimes and memory grow exponentially.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Caps {
    pub classical_states: usize,
    pub dense_dim: usize,
    pub pauli_terms: usize,
    pub pauli_rank: usize,
    pub cluster_weight: usize,
    pub partition_nodes: usize,
    pub certificate_weight: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            classical_states: 1 << 22,
            dense_dim: 4096,
            pauli_terms: 22,
            pauli_rank: 24,
            cluster_weight: 8,
            partition_nodes: 10,
            certificate_weight: 7,
        }
    }
}

impl Caps {
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        let fields: [(&str, &mut usize); 7] = [
            ("CLASSICAL_STATES", &mut caps.classical_states),
            ("DENSE_DIM", &mut caps.dense_dim),
            ("PAULI_TERMS", &mut caps.pauli_terms),
            ("PAULI_RANK", &mut caps.pauli_rank),
            ("CLUSTER_WEIGHT", &mut caps.cluster_weight),
            ("PARTITION_NODES", &mut caps.partition_nodes),
            ("CERTIFICATE_WEIGHT", &mut caps.certificate_weight),
        ];
        for (name, slot) in fields {
            if let Ok(v) = std::env::var(format!("CMI_LAB_CAP_{name}")) {
                if let Ok(v) = v.trim().parse::<usize>() {
                    *slot = v;
                }
            }
        }
        caps
    }

    /// Process-wide caps, read from the environment once.
    pub fn get() -> &'static Caps {
        static CAPS: OnceLock<Caps> = OnceLock::new();
        CAPS.get_or_init(Caps::from_env)
    }
}

pub(crate) fn check(what: &'static str, value: usize, cap: usize) -> Result<()> {
    if value > cap {
        Err(Error::CapExceeded { what, value, cap })
    } else {
        Ok(())
    }
}
