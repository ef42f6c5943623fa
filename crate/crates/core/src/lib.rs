//! Entanglement monotones, epsilon-measure bounds, universality criteria,
//! percolation experiments and LOCC branch simulation for resource states of
//! measurement-based quantum computation.
//!
//! Everything works on dense state vectors at desk scale: up to
//! [`Limits::dense_qubits`] qubits for states, up to [`Limits::tree_leaves`]
//! leaves for subcubic-tree enumeration and up to [`Limits::branches`]
//! branches per protocol run.

pub mod criteria;
pub mod epsilon;
pub mod error;
pub mod locc;
pub mod monotones;
pub mod percolation;
pub mod qstate;
pub mod rng;

pub use error::{Error, Result};

/// Size limits shared by the dense routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Limits {
    pub dense_qubits: usize,
    pub tree_leaves: usize,
    pub branches: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            dense_qubits: 14,
            tree_leaves: 10,
            branches: 1 << 20,
        }
    }
}
